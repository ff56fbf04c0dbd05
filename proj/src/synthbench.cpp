#include "hcd/synthbench.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "hcd/rng.hpp"

namespace hcd {

void SynthSpec::validate() const {
  if (n_train == 0 || n_test == 0) throw ValueError("synth spec: sample counts must be positive");
  if (rho_train < 0 || rho_train > 1 || rho_test < 0 || rho_test > 1) {
    throw ValueError("synth spec: correlations must lie in [0,1]");
  }
  if (!(causal_strength > 0) || !(spurious_strength > 0)) {
    throw ValueError("synth spec: pattern strengths must be positive");
  }
  if (noise_std < 0) throw ValueError("synth spec: noise std must be nonnegative");
  if (domains < 2 || domains > channels) {
    throw ValueError("synth spec: domain count must lie in [2," + std::to_string(channels) + "]");
  }
  if (classes < 2) throw ValueError("synth spec: need at least two classes");
  if (height < 2 * (margin + 1) + patch || width < 2 * (margin + 1) + patch) {
    throw ValueError("synth spec: image too small for a border-disjoint causal patch");
  }
}

// Every random draw happens for every sample regardless of render mode, so
// the noise stream is identical across full and ablated renders.
Dataset generate_split(const SynthSpec& spec, Split split, RenderMode mode) {
  spec.validate();
  std::size_t n = (split == Split::train) ? spec.n_train : spec.n_test;
  double rho = (split == Split::ood_test) ? spec.rho_test : spec.rho_train;

  Dataset ds;
  ds.channels = SynthSpec::channels;
  ds.height = spec.height;
  ds.width = spec.width;
  ds.images.assign(n * ds.sample_floats(), 0.0f);
  ds.y.resize(n);
  ds.d.resize(n);
  ds.causal_mask.assign(n * spec.height * spec.width, 0);

  std::size_t h = spec.height, w = spec.width, c = SynthSpec::channels;
  std::size_t place_lo = SynthSpec::margin;
  std::size_t place_hi_r = h - SynthSpec::margin - SynthSpec::patch;  // inclusive
  std::size_t place_hi_c = w - SynthSpec::margin - SynthSpec::patch;

  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(spec.seed, static_cast<std::uint64_t>(split) + 1, i));
    // class and domain are exactly balanced and independent by construction;
    // only the cue links them, through the agreement draw below
    int y = static_cast<int>(i % spec.classes);
    int d = static_cast<int>((i / spec.classes) % spec.domains);

    // draw order: agreement, patch row, patch col, noise
    bool agree = rng.uniform() < rho;
    int cue = agree ? (y % 2) : 1 - (y % 2);
    std::size_t pr = place_lo + rng.below(place_hi_r - place_lo + 1);
    std::size_t pc = place_lo + rng.below(place_hi_c - place_lo + 1);

    ds.y[i] = static_cast<std::uint16_t>(y);
    ds.d[i] = static_cast<std::uint16_t>(d);

    float* img = ds.images.data() + i * ds.sample_floats();

    // spurious cue: signed border tint on the domain's palette channel; the
    // sign carries the label-correlated bit, the channel carries the domain
    if (mode != RenderMode::no_cue) {
      std::size_t ch = static_cast<std::size_t>(d) % c;
      float tint = static_cast<float>(spec.spurious_strength) * (cue ? 1.0f : -1.0f);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t col = 0; col < w; ++col) {
          bool on_border = r < SynthSpec::border || col < SynthSpec::border ||
                           r >= h - SynthSpec::border || col >= w - SynthSpec::border;
          if (on_border) {
            img[(ch * h + r) * w + col] += tint;
          }
        }
    }

    // causal pattern: oriented stripe in a patch, same on every channel
    std::uint8_t* mask = ds.causal_mask.data() + i * h * w;
    for (std::size_t u = 0; u < SynthSpec::patch; ++u)
      for (std::size_t v = 0; v < SynthSpec::patch; ++v) {
        std::size_t shift = static_cast<std::size_t>(y) / 2 % SynthSpec::patch;
        std::size_t band = (y % 2 == 0) ? (u + SynthSpec::patch - v + shift) % SynthSpec::patch
                                        : (u + v + shift) % SynthSpec::patch;
        bool on_stripe = band < SynthSpec::stripe;
        if (!on_stripe) continue;
        std::size_t r = pr + u, col = pc + v;
        mask[r * w + col] = 1;
        if (mode != RenderMode::no_causal) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            img[(ch * h + r) * w + col] += static_cast<float>(spec.causal_strength);
          }
        }
      }

    // pixel noise, channel-major
    if (spec.noise_std > 0) {
      for (std::size_t p = 0; p < ds.sample_floats(); ++p) {
        img[p] += static_cast<float>(spec.noise_std * rng.normal());
      }
    }
  }
  return ds;
}

SynthData generate(const SynthSpec& spec) {
  SynthData out;
  out.spec = spec;
  out.train = generate_split(spec, Split::train);
  out.id_test = generate_split(spec, Split::id_test);
  out.ood_test = generate_split(spec, Split::ood_test);
  return out;
}

Tensor Dataset::batch_images(const std::vector<std::size_t>& idx) const {
  std::size_t k = idx.size(), f = sample_floats();
  std::vector<double> vals(k * f);
  for (std::size_t b = 0; b < k; ++b) {
    const float* src = images.data() + idx[b] * f;
    for (std::size_t p = 0; p < f; ++p) vals[b * f + p] = static_cast<double>(src[p]);
  }
  return Tensor({k, channels, height, width}, std::move(vals));
}

std::vector<int> Dataset::batch_labels(const std::vector<std::size_t>& idx) const {
  std::vector<int> out(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) out[b] = y[idx[b]];
  return out;
}

std::vector<int> Dataset::batch_domains(const std::vector<std::size_t>& idx) const {
  std::vector<int> out(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) out[b] = d[idx[b]];
  return out;
}

double shortcut_gap(double id_accuracy, double ood_accuracy) {
  return id_accuracy - ood_accuracy;
}

double cue_only_accuracy(const Dataset& ds) {
  // reads the border tint sign summed over channels: the linear shortcut
  std::size_t correct = 0;
  std::size_t h = ds.height, w = ds.width;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const float* img = ds.images.data() + i * ds.sample_floats();
    double acc = 0.0;
    for (std::size_t ch = 0; ch < ds.channels; ++ch)
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t col = 0; col < w; ++col) {
          bool on_border = r < SynthSpec::border || col < SynthSpec::border ||
                           r >= h - SynthSpec::border || col >= w - SynthSpec::border;
          if (on_border) acc += img[(ch * h + r) * w + col];
        }
    int pred = acc > 0.0 ? 1 : 0;
    if (pred == ds.y[i] % 2) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double causal_template_accuracy(const Dataset& ds) {
  std::size_t correct = 0;
  std::size_t h = ds.height, w = ds.width;
  constexpr std::size_t pk = SynthSpec::patch;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const float* img = ds.images.data() + i * ds.sample_floats();
    // score = best template correlation over positions, per orientation;
    // channel-summed image
    double best_score = -1e300;
    int best_y = 0;
    for (int cls = 0; cls < 2; ++cls) {
      for (std::size_t pr = 0; pr + pk <= h; ++pr)
        for (std::size_t pc = 0; pc + pk <= w; ++pc) {
          double score = 0.0;
          for (std::size_t u = 0; u < pk; ++u)
            for (std::size_t v = 0; v < pk; ++v) {
              bool on = ((cls == 0 ? (u + pk - v) : (u + v)) % pk) < SynthSpec::stripe;
              double pix = 0.0;
              for (std::size_t ch = 0; ch < ds.channels; ++ch) {
                pix += img[(ch * h + pr + u) * w + pc + v];
              }
              score += (on ? 1.0 : -0.5) * pix;
            }
          if (score > best_score) {
            best_score = score;
            best_y = cls;
          }
        }
    }
    if (best_y == ds.y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

namespace {

constexpr char kMagic[8] = {'H', 'C', 'D', 'S', 'Y', 'N', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ValueError("dataset file truncated");
  return v;
}

}  // namespace

void save_dataset(const std::string& path, const SynthSpec& spec, Split split,
                  const Dataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ValueError("cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint64_t>(os, spec.n_train);
  put<std::uint64_t>(os, spec.n_test);
  put<std::uint64_t>(os, spec.height);
  put<std::uint64_t>(os, spec.width);
  put<double>(os, spec.causal_strength);
  put<double>(os, spec.spurious_strength);
  put<double>(os, spec.rho_train);
  put<double>(os, spec.rho_test);
  put<double>(os, spec.noise_std);
  put<std::uint64_t>(os, spec.domains);
  put<std::uint64_t>(os, spec.classes);
  put<std::uint64_t>(os, spec.seed);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(split));
  put<std::uint64_t>(os, ds.size());
  put<std::uint64_t>(os, ds.channels);
  put<std::uint64_t>(os, ds.height);
  put<std::uint64_t>(os, ds.width);
  os.write(reinterpret_cast<const char*>(ds.images.data()),
           static_cast<std::streamsize>(ds.images.size() * sizeof(float)));
  os.write(reinterpret_cast<const char*>(ds.y.data()),
           static_cast<std::streamsize>(ds.y.size() * sizeof(std::uint16_t)));
  os.write(reinterpret_cast<const char*>(ds.d.data()),
           static_cast<std::streamsize>(ds.d.size() * sizeof(std::uint16_t)));
  if (!os) throw ValueError("failed writing " + path);
}

Dataset load_dataset(const std::string& path, SynthSpec* spec_out, Split* split_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValueError("cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw ValueError(path + " is not a dataset file (bad magic)");
  }
  std::uint32_t version = take<std::uint32_t>(is);
  if (version != kVersion) {
    throw ValueError("unsupported dataset version " + std::to_string(version));
  }
  SynthSpec spec;
  spec.n_train = take<std::uint64_t>(is);
  spec.n_test = take<std::uint64_t>(is);
  spec.height = take<std::uint64_t>(is);
  spec.width = take<std::uint64_t>(is);
  spec.causal_strength = take<double>(is);
  spec.spurious_strength = take<double>(is);
  spec.rho_train = take<double>(is);
  spec.rho_test = take<double>(is);
  spec.noise_std = take<double>(is);
  spec.domains = take<std::uint64_t>(is);
  spec.classes = take<std::uint64_t>(is);
  spec.seed = take<std::uint64_t>(is);
  Split split = static_cast<Split>(take<std::uint32_t>(is));
  Dataset ds;
  std::size_t n = take<std::uint64_t>(is);
  ds.channels = take<std::uint64_t>(is);
  ds.height = take<std::uint64_t>(is);
  ds.width = take<std::uint64_t>(is);
  ds.images.resize(n * ds.sample_floats());
  ds.y.resize(n);
  ds.d.resize(n);
  is.read(reinterpret_cast<char*>(ds.images.data()),
          static_cast<std::streamsize>(ds.images.size() * sizeof(float)));
  is.read(reinterpret_cast<char*>(ds.y.data()),
          static_cast<std::streamsize>(n * sizeof(std::uint16_t)));
  is.read(reinterpret_cast<char*>(ds.d.data()),
          static_cast<std::streamsize>(n * sizeof(std::uint16_t)));
  if (!is) throw ValueError(path + " truncated");
  if (spec_out) *spec_out = spec;
  if (split_out) *split_out = split;
  return ds;
}

void export_csv(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::ofstream labels(fs::path(dir) / "labels.csv");
  labels << "index,y,d\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    labels << i << "," << ds.y[i] << "," << ds.d[i] << "\n";
  }

  std::ofstream images(fs::path(dir) / "images.csv");
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const float* img = ds.images.data() + i * ds.sample_floats();
    for (std::size_t p = 0; p < ds.sample_floats(); ++p) {
      std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(img[p]));
      images << (p ? "," : "") << buf;
    }
    images << "\n";
  }

  if (!ds.causal_mask.empty()) {
    std::ofstream masks(fs::path(dir) / "masks.csv");
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const std::uint8_t* m = ds.causal_mask.data() + i * ds.height * ds.width;
      for (std::size_t p = 0; p < ds.height * ds.width; ++p) {
        masks << (p ? "," : "") << static_cast<int>(m[p]);
      }
      masks << "\n";
    }
  }
}

}  // namespace hcd
