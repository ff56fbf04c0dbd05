#include "hcd/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hcd {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty()) {
    throw ValueError(key + ": '" + v + "' is not a number");
  }
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  double d = parse_double(key, v);
  if (d < 0 || d != std::floor(d)) {
    throw ValueError(key + ": '" + v + "' is not a nonnegative integer");
  }
  return static_cast<std::size_t>(d);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ValueError(key + ": '" + v + "' is not true/false");
}

std::vector<std::uint64_t> parse_seeds(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  auto range_pos = v.find("..");
  if (range_pos != std::string::npos) {
    std::uint64_t lo = parse_size(key, v.substr(0, range_pos));
    std::uint64_t hi = parse_size(key, v.substr(range_pos + 2));
    if (hi < lo) throw ValueError(key + ": range '" + v + "' is inverted");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(key, trim(item)));
  if (out.empty()) throw ValueError(key + ": no seeds given");
  return out;
}

std::string seeds_to_string(const std::vector<std::uint64_t>& seeds) {
  // contiguous ranges render as lo..hi
  bool contiguous = seeds.size() > 1;
  for (std::size_t i = 1; i < seeds.size(); ++i) {
    if (seeds[i] != seeds[i - 1] + 1) contiguous = false;
  }
  if (contiguous) {
    return std::to_string(seeds.front()) + ".." + std::to_string(seeds.back());
  }
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(seeds[i]);
  }
  return out;
}

TermSchedule parse_term(const std::string& key, const std::string& v) {
  // either a constant or initial:target:activation:shape
  if (v.find(':') == std::string::npos) {
    double c = parse_double(key, v);
    return TermSchedule{c, c, 0, RampShape::step};
  }
  std::stringstream ss(v);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, ':')) parts.push_back(trim(part));
  if (parts.size() != 4) {
    throw ValueError(key + ": expected 'initial:target:epoch:shape', got '" + v + "'");
  }
  TermSchedule t;
  t.initial = parse_double(key, parts[0]);
  t.target = parse_double(key, parts[1]);
  t.activation_epoch = parse_size(key, parts[2]);
  if (parts[3] == "step") t.shape = RampShape::step;
  else if (parts[3] == "linear") t.shape = RampShape::linear;
  else throw ValueError(key + ": unknown ramp shape '" + parts[3] + "'");
  return t;
}

std::string term_to_string(const TermSchedule& t) {
  return fmt_double(t.initial) + ":" + fmt_double(t.target) + ":" +
         std::to_string(t.activation_epoch) + ":" +
         (t.shape == RampShape::step ? "step" : "linear");
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_string(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ValueError("config line " + std::to_string(lineno) + ": malformed section");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValueError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::string full = section + "." + key;

    if (full == "experiment.method") {
      if (value != "hcd" && value != "erm") {
        throw ValueError("experiment.method must be hcd or erm, got '" + value + "'");
      }
      cfg.method = value;
    } else if (full == "experiment.seeds") cfg.seeds = parse_seeds(full, value);
    else if (full == "experiment.epochs") cfg.epochs = parse_size(full, value);
    else if (full == "experiment.output_dir") cfg.output_dir = value;
    else if (full == "experiment.paper_faithful") cfg.paper_faithful = parse_bool(full, value);
    else if (full == "data.n_train") cfg.data.n_train = parse_size(full, value);
    else if (full == "data.n_test") cfg.data.n_test = parse_size(full, value);
    else if (full == "data.image_size") {
      cfg.data.height = cfg.data.width = parse_size(full, value);
    } else if (full == "data.causal_strength") cfg.data.causal_strength = parse_double(full, value);
    else if (full == "data.spurious_strength") {
      cfg.data.spurious_strength = parse_double(full, value);
    } else if (full == "data.rho_train") cfg.data.rho_train = parse_double(full, value);
    else if (full == "data.rho_test") cfg.data.rho_test = parse_double(full, value);
    else if (full == "data.noise_std") cfg.data.noise_std = parse_double(full, value);
    else if (full == "data.domains") cfg.data.domains = parse_size(full, value);
    else if (full == "data.classes") cfg.data.classes = parse_size(full, value);
    else if (full == "model.conv1_channels") cfg.model.conv1_channels = parse_size(full, value);
    else if (full == "model.conv2_channels") cfg.model.conv2_channels = parse_size(full, value);
    else if (full == "model.kernel_size") cfg.model.kernel_size = parse_size(full, value);
    else if (full == "model.gate_reduction") cfg.model.gate_reduction = parse_size(full, value);
    else if (full == "model.dropout_p") cfg.model.dropout_p = parse_double(full, value);
    else if (full == "model.projector_width") cfg.model.projector_width = parse_size(full, value);
    else if (full == "vicreg.lambda_sim") cfg.vicreg.lambda_sim = parse_double(full, value);
    else if (full == "vicreg.lambda_std") cfg.vicreg.lambda_std = parse_double(full, value);
    else if (full == "vicreg.lambda_cov") cfg.vicreg.lambda_cov = parse_double(full, value);
    else if (full == "vicreg.gamma") cfg.vicreg.gamma = parse_double(full, value);
    else if (full == "schedule.vic") cfg.schedule.vic = parse_term(full, value);
    else if (full == "schedule.gram") cfg.schedule.gram = parse_term(full, value);
    else if (full == "schedule.class_mi") cfg.schedule.class_mi = parse_term(full, value);
    else if (full == "schedule.domain_mi") cfg.schedule.domain_mi = parse_term(full, value);
    else if (full == "schedule.sparsity") cfg.schedule.sparsity = parse_term(full, value);
    else if (full == "optim.lr") cfg.adam.lr = parse_double(full, value);
    else if (full == "optim.batch_size") cfg.batch_size = parse_size(full, value);
    else if (full == "optim.adam_beta1") cfg.adam.beta1 = parse_double(full, value);
    else if (full == "optim.adam_beta2") cfg.adam.beta2 = parse_double(full, value);
    else if (full == "optim.adam_eps") cfg.adam.eps = parse_double(full, value);
    else if (full == "optim.grad_clip") cfg.grad_clip = parse_double(full, value);
    else if (full == "train.stylemix") cfg.stylemix = parse_bool(full, value);
    else if (full == "train.stylemix_epsilon") cfg.stylemix_epsilon = parse_double(full, value);
    else {
      throw ValueError("unknown config key '" + full + "' (line " + std::to_string(lineno) + ")");
    }
  }
  cfg.schedule.epochs_total = cfg.epochs;
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ValueError("cannot open config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_string(ss.str());
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "[experiment]\n";
  os << "method = " << method << "\n";
  os << "seeds = " << seeds_to_string(seeds) << "\n";
  os << "epochs = " << epochs << "\n";
  os << "output_dir = " << output_dir << "\n";
  os << "paper_faithful = " << (paper_faithful ? "true" : "false") << "\n";
  os << "\n[data]\n";
  os << "n_train = " << data.n_train << "\n";
  os << "n_test = " << data.n_test << "\n";
  os << "image_size = " << data.height << "\n";
  os << "causal_strength = " << fmt_double(data.causal_strength) << "\n";
  os << "spurious_strength = " << fmt_double(data.spurious_strength) << "\n";
  os << "rho_train = " << fmt_double(data.rho_train) << "\n";
  os << "rho_test = " << fmt_double(data.rho_test) << "\n";
  os << "noise_std = " << fmt_double(data.noise_std) << "\n";
  os << "domains = " << data.domains << "\n";
  os << "classes = " << data.classes << "\n";
  os << "\n[model]\n";
  os << "conv1_channels = " << model.conv1_channels << "\n";
  os << "conv2_channels = " << model.conv2_channels << "\n";
  os << "kernel_size = " << model.kernel_size << "\n";
  os << "gate_reduction = " << model.gate_reduction << "\n";
  os << "dropout_p = " << fmt_double(model.dropout_p) << "\n";
  os << "projector_width = " << model.projector_width << "\n";
  os << "\n[vicreg]\n";
  os << "lambda_sim = " << fmt_double(vicreg.lambda_sim) << "\n";
  os << "lambda_std = " << fmt_double(vicreg.lambda_std) << "\n";
  os << "lambda_cov = " << fmt_double(vicreg.lambda_cov) << "\n";
  os << "gamma = " << fmt_double(vicreg.gamma) << "\n";
  os << "\n[schedule]\n";
  os << "vic = " << term_to_string(schedule.vic) << "\n";
  os << "gram = " << term_to_string(schedule.gram) << "\n";
  os << "class_mi = " << term_to_string(schedule.class_mi) << "\n";
  os << "domain_mi = " << term_to_string(schedule.domain_mi) << "\n";
  os << "sparsity = " << term_to_string(schedule.sparsity) << "\n";
  os << "\n[optim]\n";
  os << "lr = " << fmt_double(adam.lr) << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "adam_beta1 = " << fmt_double(adam.beta1) << "\n";
  os << "adam_beta2 = " << fmt_double(adam.beta2) << "\n";
  os << "adam_eps = " << fmt_double(adam.eps) << "\n";
  os << "grad_clip = " << fmt_double(grad_clip) << "\n";
  os << "\n[train]\n";
  os << "stylemix = " << (stylemix ? "true" : "false") << "\n";
  os << "stylemix_epsilon = " << fmt_double(stylemix_epsilon) << "\n";
  return os.str();
}

void ExperimentConfig::validate() const {
  if (method != "hcd" && method != "erm") throw ValueError("experiment.method must be hcd or erm");
  if (seeds.empty()) throw ValueError("experiment.seeds must name at least one seed");
  if (epochs == 0) throw ValueError("experiment.epochs must be positive");
  if (output_dir.empty()) throw ValueError("experiment.output_dir must not be empty");
  if (!(adam.lr > 0)) throw ValueError("optim.lr must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ValueError("optim.adam_beta1 must lie in [0,1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ValueError("optim.adam_beta2 must lie in [0,1)");
  if (!(adam.eps > 0)) throw ValueError("optim.adam_eps must be positive");
  if (batch_size < 2) throw ValueError("optim.batch_size must be >= 2");
  if (grad_clip < 0) throw ValueError("optim.grad_clip must be nonnegative (0 disables)");
  if (!(stylemix_epsilon > 0)) throw ValueError("train.stylemix_epsilon must be positive");
  data.validate();
  model_config().validate();
  vicreg.validate();
  CurriculumSchedule sched = schedule;
  sched.epochs_total = epochs;
  sched.validate();
}

TrainFlags ExperimentConfig::train_flags() const {
  TrainFlags f;
  f.grad_clip_enabled = grad_clip > 0 && !paper_faithful;
  f.clip_norm = grad_clip;
  f.inverted_dropout_scaling = !paper_faithful;
  f.stylemix_enabled = stylemix;
  f.stylemix_epsilon = stylemix_epsilon;
  return f;
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig m = model;
  m.in_channels = SynthSpec::channels;
  m.image_hw = data.height;
  m.classes = data.classes;
  m.use_gate = (method == "hcd");
  return m;
}

}  // namespace hcd
