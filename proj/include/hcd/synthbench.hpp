#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcd/tensor.hpp"

namespace hcd {

// Spurious-correlation benchmark: the class is encoded by the orientation of
// a small stripe patch at a random interior position (requires spatial
// composition to read), the domain by a border tint that is linear in pixel
// values (an easy shortcut). The tint agrees with the class with probability
// rho of the split.
struct SynthSpec {
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  std::size_t height = 16;
  std::size_t width = 16;
  double causal_strength = 1.0;
  double spurious_strength = 1.0;
  double rho_train = 0.95;
  double rho_test = 0.05;  // ood split; id split reuses rho_train
  double noise_std = 0.3;
  std::size_t domains = 2;
  std::size_t classes = 2;
  std::uint64_t seed = 0;

  static constexpr std::size_t channels = 3;
  static constexpr std::size_t patch = 6;    // causal patch side
  static constexpr std::size_t stripe = 2;   // stripe thickness inside the patch
  static constexpr std::size_t border = 2;   // spurious ring width
  static constexpr std::size_t margin = 3;   // patch offset from the edge

  void validate() const;
};

enum class Split : std::uint32_t { train = 0, id_test = 1, ood_test = 2 };

// omit parts of the rendering while keeping the random draws identical;
// used by the channel-sensitivity analysis
enum class RenderMode { full, no_cue, no_causal };

struct Dataset {
  std::size_t channels = 0, height = 0, width = 0;
  std::vector<float> images;        // n * C * H * W, row-major
  std::vector<std::uint16_t> y;
  std::vector<std::uint16_t> d;
  std::vector<std::uint8_t> causal_mask;  // n * H * W, in-memory only

  std::size_t size() const { return y.size(); }
  std::size_t sample_floats() const { return channels * height * width; }

  // f64 image tensor [k,C,H,W] for the given indices
  Tensor batch_images(const std::vector<std::size_t>& idx) const;
  std::vector<int> batch_labels(const std::vector<std::size_t>& idx) const;
  std::vector<int> batch_domains(const std::vector<std::size_t>& idx) const;
};

struct SynthData {
  SynthSpec spec;
  Dataset train, id_test, ood_test;
};

// pure function of the spec (counter-based rng keyed on seed, split, index)
SynthData generate(const SynthSpec& spec);
Dataset generate_split(const SynthSpec& spec, Split split, RenderMode mode = RenderMode::full);

// id-test accuracy minus ood-test accuracy
double shortcut_gap(double id_accuracy, double ood_accuracy);

// Reference classifiers for calibration and tests.
// Reads only the border tint and predicts the domain-aligned class.
double cue_only_accuracy(const Dataset& ds);
// Matches both stripe templates at every valid position and picks the best.
double causal_template_accuracy(const Dataset& ds);

// binary serialization (little-endian), format documented in the README
void save_dataset(const std::string& path, const SynthSpec& spec, Split split,
                  const Dataset& ds);
Dataset load_dataset(const std::string& path, SynthSpec* spec_out = nullptr,
                     Split* split_out = nullptr);

// directory-of-csv export for inspection: labels.csv, images.csv, masks.csv
void export_csv(const std::string& dir, const Dataset& ds);

}  // namespace hcd
