#include "hcd/selftest.hpp"

#include <cmath>
#include <sstream>

#include "hcd/grad_check.hpp"
#include "hcd/metrics.hpp"
#include "hcd/ops.hpp"
#include "hcd/styleaug.hpp"
#include "hcd/trainloop.hpp"
#include "hcd/vicreg.hpp"

namespace hcd {

namespace {

Tensor gaussian(Shape shape, Rng& rng, double std = 1.0) {
  std::vector<double> vals(shape_numel(shape));
  for (auto& v : vals) v = std * rng.normal();
  return Tensor(std::move(shape), std::move(vals));
}

void check(SelftestReport::Suite& suite, bool ok, const std::string& what) {
  if (ok) {
    ++suite.passed;
  } else {
    ++suite.failed;
    suite.failures.push_back(what);
  }
}

void grad_suite(SelftestReport::Suite& suite) {
  Rng rng(2024);
  auto gc = [&](auto fn, const Tensor& x, double tol, const std::string& what) {
    auto rep = grad_check(fn, x, 1e-5, tol);
    check(suite, rep.passed, what + " (max rel err " + format_double(rep.max_rel_err) + ")");
  };

  for (int cfg = 0; cfg < 3; ++cfg) {
    // classification term
    std::vector<int> labels{0, 1, 0, 1};
    Tensor logits = gaussian({4, 2}, rng);
    gc([&](const Tensor& x) { return ops::softmax_cross_entropy(x, labels); }, logits, 1e-4,
       "cls grad");

    // vicreg term
    Tensor z = gaussian({6, 4}, rng);
    Tensor zt = gaussian({6, 4}, rng);
    VicregWeights vw;
    gc([&](const Tensor& x) { return vicreg_loss(x, zt, vw).total; }, z, 1e-4, "vic grad");

    // gram term
    Tensor f = gaussian({2, 3, 3, 3}, rng);
    Tensor f2 = gaussian({2, 3, 3, 3}, rng);
    gc([&](const Tensor& x) { return gram_loss(x, f2); }, f, 1e-4, "gram grad");

    // mutual-information terms at a frozen bandwidth
    Tensor zb = gaussian({6, 3}, rng);
    LabelVector d({0, 1, 0, 1, 0, 1}, 2);
    double sigma = median_pairwise_distance(zb);
    gc([&](const Tensor& x) { return mi_domain_loss(x, d, sigma); }, zb, 1e-4, "mi_d grad");
    gc([&](const Tensor& x) { return mi_class_loss(x, d, sigma); }, zb, 1e-4, "mi_c grad");

    // sparsity term
    Tensor mask = gaussian({4, 6}, rng);
    for (auto& v : mask.mut_values()) v = std::abs(v);
    gc([&](const Tensor& x) { return sparse_loss(x); }, mask, 1e-4, "sparse grad");

    // gate forward wrt both weight matrices
    GateParams gp = GateParams::init(6, 3, 0.2, rng);
    Tensor zg = gaussian({4, 6}, rng);
    std::vector<double> xiv(24);
    for (auto& v : xiv) v = rng.uniform() < 0.8 ? 1.0 : 0.0;
    Tensor xi({4, 6}, xiv);
    auto fwd = [&](Tensor w1, Tensor w2) {
      GateParams q;
      q.w1 = std::move(w1);
      q.w2 = std::move(w2);
      q.bn = gp.bn;
      q.reduction = gp.reduction;
      q.dropout_p = gp.dropout_p;
      return ops::sum(gate_forward_with_dropout(zg, q, GateMode::train, xi).z_hat);
    };
    gc([&](const Tensor& x) { return fwd(x, gp.w2); }, gp.w1, 1e-4, "gate w1 grad");
    gc([&](const Tensor& x) { return fwd(gp.w1, x); }, gp.w2, 1e-4, "gate w2 grad");
  }
}

void entropy_suite(SelftestReport::Suite& suite) {
  Rng rng(4048);
  bool bounds_ok = true;
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t n = 2 + rng.below(31);
    KernelMatrix k = rbf_kernel(gaussian({n, 1 + rng.below(5)}, rng));
    double s = matrix_entropy(k).value();
    if (s < -1e-12 || s > std::log2(static_cast<double>(n)) + 1e-12) bounds_ok = false;
    try {
      validate_kernel(k, 1e-9);
    } catch (const std::exception&) {
      bounds_ok = false;
    }
  }
  check(suite, bounds_ok, "entropy bounds over 200 random kernels");

  // exact-zero mi cases
  Rng r2(11);
  Tensor z = gaussian({6, 3}, r2);
  check(suite, std::abs(mi_domain_loss(z, LabelVector({0, 0, 0, 0, 0, 0}, 1)).value()) < 1e-10,
        "mi zero for uninformative domain");
  Tensor zc({4, 3}, std::vector<double>(12, 0.25));
  check(suite, std::abs(mi_domain_loss(zc, LabelVector({0, 0, 1, 1}, 2)).value()) < 1e-10,
        "mi zero for constant features");
}

// compact plain-classifier reference; mirrors the published training recipe
struct PlainReference {
  Tensor c1w, c1b, c2w, c2b, hw, hb;
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;
  AdamConfig cfg;
  TrainFlags flags;

  std::vector<Tensor*> params() { return {&c1w, &c1b, &c2w, &c2b, &hw, &hb}; }

  void step(const Batch& batch) {
    Tape tape;
    {
      TapeScope scope(tape);
      Tensor h1 = ops::relu(ops::conv2d(batch.x, c1w, c1b, 2, c1w.shape()[2] / 2));
      Tensor f = ops::relu(ops::conv2d(h1, c2w, c2b, 2, c2w.shape()[2] / 2));
      Tensor z = ops::spatial_mean(f);
      Tensor logits = ops::add(ops::matmul(z, ops::transpose(hw)), hb);
      tape.backward(ops::softmax_cross_entropy(logits, batch.y));
    }
    auto ps = params();
    if (flags.grad_clip_enabled) {
      double norm = 0.0;
      for (Tensor* p : ps)
        if (p->has_grad())
          for (double g : p->data_->grad) norm += g * g;
      norm = std::sqrt(norm);
      if (norm > flags.clip_norm && norm != 0.0) {
        double s = flags.clip_norm / norm;
        for (Tensor* p : ps)
          if (p->has_grad())
            for (double& g : p->data_->grad) g *= s;
      }
    }
    t += 1;
    double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      auto& vals = ps[i]->mut_values();
      bool hg = ps[i]->has_grad();
      for (std::size_t j = 0; j < vals.size(); ++j) {
        double g = hg ? ps[i]->data_->grad[j] : 0.0;
        m[i][j] = cfg.beta1 * m[i][j] + (1 - cfg.beta1) * g;
        v[i][j] = cfg.beta2 * v[i][j] + (1 - cfg.beta2) * g * g;
        vals[j] -= cfg.lr * (m[i][j] / corr1) / (std::sqrt(v[i][j] / corr2) + cfg.eps);
      }
      ps[i]->zero_grad();
    }
  }
};

void oracle_suite(SelftestReport::Suite& suite) {
  SynthSpec spec;
  spec.n_train = 128;
  spec.n_test = 64;
  spec.seed = 99;
  Dataset train = generate_split(spec, Split::train);

  ModelConfig mc;
  mc.use_gate = false;
  mc.conv1_channels = 8;
  mc.conv2_channels = 16;
  Rng init_rng(314);
  HcdModel model = HcdModel::init(mc, init_rng);

  PlainReference ref;
  ref.c1w = model.conv1_w.clone();
  ref.c1b = model.conv1_b.clone();
  ref.c2w = model.conv2_w.clone();
  ref.c2b = model.conv2_b.clone();
  ref.hw = model.head_w.clone();
  ref.hb = model.head_b.clone();
  for (Tensor* p : ref.params()) {
    ref.m.emplace_back(p->numel(), 0.0);
    ref.v.emplace_back(p->numel(), 0.0);
  }

  AdamState opt = AdamState::init(model.parameters(), AdamConfig{});
  CurriculumSchedule sched = CurriculumSchedule::defaults(8);
  TrainFlags flags;
  ref.flags = flags;

  Rng ra(161), rb(161);
  std::size_t gstep = 0;
  for (std::size_t e = 0; e < 5; ++e) {
    train_epoch(model, opt, train, 32, sched, VicregWeights{}, e, gstep, ra, flags);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rb.shuffle(order);
    for (std::size_t start = 0; start + 2 <= order.size(); start += 32) {
      std::size_t end = std::min(start + 32, order.size());
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      ref.step(Batch{train.batch_images(idx), train.batch_labels(idx),
                     train.batch_domains(idx)});
    }
  }

  bool identical = true;
  auto mp = model.parameters();
  auto rp = ref.params();
  for (std::size_t i = 0; i < mp.size() && identical; ++i) {
    if (mp[i]->values() != rp[i]->values()) identical = false;
  }
  check(suite, identical, "erm trajectory bitwise equals the plain reference");
  check(suite, gstep == ref.t, "step counts agree");
}

}  // namespace

bool SelftestReport::ok() const {
  for (const auto& s : suites) {
    if (s.failed) return false;
  }
  return true;
}

std::string SelftestReport::render() const {
  std::ostringstream os;
  for (const auto& s : suites) {
    os << "[" << (s.failed ? "FAIL" : "PASS") << "] " << s.name << ": " << s.passed
       << " passed, " << s.failed << " failed\n";
    for (const auto& f : s.failures) os << "       " << f << "\n";
  }
  os << (ok() ? "selftest: all suites passed\n" : "selftest: FAILURES present\n");
  return os.str();
}

SelftestReport run_selftest(Mutation mutation) {
  set_mutation(mutation);
  SelftestReport report;
  report.suites.resize(3);
  report.suites[0].name = "grad-check";
  report.suites[1].name = "entropy-bounds";
  report.suites[2].name = "oracle-equivalence";
  try {
    grad_suite(report.suites[0]);
    entropy_suite(report.suites[1]);
    oracle_suite(report.suites[2]);
  } catch (...) {
    set_mutation(Mutation::none);
    throw;
  }
  set_mutation(Mutation::none);
  return report;
}

}  // namespace hcd
