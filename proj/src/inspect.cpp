#include "hcd/inspect.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hcd/gater.hpp"
#include "hcd/metrics.hpp"
#include "hcd/ops.hpp"

namespace hcd {

namespace {

Dataset truncate(Dataset ds, std::size_t n) {
  n = std::min(n, ds.size());
  ds.images.resize(n * ds.sample_floats());
  ds.y.resize(n);
  ds.d.resize(n);
  if (!ds.causal_mask.empty()) ds.causal_mask.resize(n * ds.height * ds.width);
  return ds;
}

}  // namespace

ChannelReport inspect_mask(HcdModel& model, const SynthSpec& spec, std::size_t n_probe,
                           std::size_t batch_size) {
  SynthSpec probe_spec = spec;
  probe_spec.n_test = std::max<std::size_t>(n_probe, 2);
  Dataset full = truncate(generate_split(probe_spec, Split::id_test), n_probe);
  Dataset no_cue = truncate(generate_split(probe_spec, Split::id_test, RenderMode::no_cue),
                            n_probe);
  Dataset no_causal = truncate(generate_split(probe_spec, Split::id_test, RenderMode::no_causal),
                               n_probe);

  std::size_t channels = model.cfg.conv2_channels;
  ChannelReport rep;
  rep.cue_sensitivity.assign(channels, 0.0);
  rep.causal_sensitivity.assign(channels, 0.0);
  rep.mask_mean.assign(channels, 1.0);

  std::vector<double> mask_acc(channels, 0.0);
  std::size_t rows = 0;
  Rng unused(0);

  for (std::size_t start = 0; start < full.size(); start += batch_size) {
    std::size_t end = std::min(start + batch_size, full.size());
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;

    Tensor z_full = pool(model.features(full.batch_images(idx)));
    Tensor z_nocue = pool(model.features(no_cue.batch_images(idx)));
    Tensor z_nocausal = pool(model.features(no_causal.batch_images(idx)));

    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t c = 0; c < channels; ++c) {
        rep.cue_sensitivity[c] += std::abs(z_full(i, c) - z_nocue(i, c));
        rep.causal_sensitivity[c] += std::abs(z_full(i, c) - z_nocausal(i, c));
      }

    if (model.cfg.use_gate) {
      GateOutput out = gate_forward(z_full, model.gate, GateMode::eval, unused);
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t c = 0; c < channels; ++c) mask_acc[c] += out.mask(i, c);
    }
    rows += idx.size();
  }

  for (std::size_t c = 0; c < channels; ++c) {
    rep.cue_sensitivity[c] /= static_cast<double>(rows);
    rep.causal_sensitivity[c] /= static_cast<double>(rows);
    if (model.cfg.use_gate) rep.mask_mean[c] = mask_acc[c] / static_cast<double>(rows);
  }

  rep.group.assign(channels, 0);
  double cue_mask = 0.0, causal_mask = 0.0;
  for (std::size_t c = 0; c < channels; ++c) {
    bool cue_dominant = rep.cue_sensitivity[c] > rep.causal_sensitivity[c];
    rep.group[c] = cue_dominant ? 1 : 0;
    if (cue_dominant) {
      cue_mask += rep.mask_mean[c];
      ++rep.cue_channels;
    } else {
      causal_mask += rep.mask_mean[c];
      ++rep.causal_channels;
    }
  }
  if (rep.cue_channels > 0) rep.cue_group_mask_mean = cue_mask / rep.cue_channels;
  if (rep.causal_channels > 0) rep.causal_group_mask_mean = causal_mask / rep.causal_channels;
  return rep;
}

std::string ChannelReport::to_csv() const {
  std::ostringstream os;
  os << "channel,mask_mean,cue_sensitivity,causal_sensitivity,group\n";
  for (std::size_t c = 0; c < mask_mean.size(); ++c) {
    os << c << "," << format_double(mask_mean[c]) << "," << format_double(cue_sensitivity[c])
       << "," << format_double(causal_sensitivity[c]) << ","
       << (group[c] ? "cue" : "causal") << "\n";
  }
  return os.str();
}

}  // namespace hcd
