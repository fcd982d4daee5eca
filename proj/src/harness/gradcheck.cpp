#include "liftpool/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "liftpool/errors.hpp"
#include "liftpool/fdiff.hpp"
#include "liftpool/model.hpp"
#include "liftpool/ops.hpp"
#include "liftpool/pooling.hpp"
#include "liftpool/tlp.hpp"

namespace liftpool::harness {
namespace {

using kernels::Activation;
using kernels::NormKind;

double evaluate_scalar(const ScalarBuilder& build) {
  Tape tape;
  return build(tape).value().item();
}

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Every tensor of a parameter set gets random values, so no branch starts
// at the zero initialization.
void randomize(tlp::TlpParams& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  p.visit([&](const std::string& name, Tensor& t) {
    const bool gamma = name.ends_with("gamma");
    for (double& v : t.values()) v = gamma ? 1.0 + u(rng) : u(rng);
  });
}

std::vector<Tensor*> tlp_leaves(tlp::TlpParams& p) {
  std::vector<Tensor*> out;
  p.visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

// Central differences are meaningless across a ReLU kink: cases redraw
// their input until every ReLU sees a pre-activation at least this far
// from zero.
constexpr double kKinkMargin = 1e-3;

double min_abs(const Tensor& t) {
  double m = 1e300;
  for (double v : t.values()) m = std::min(m, std::abs(v));
  return m;
}

// ReLU input of a standard-arch sub-net; none for the simple arch.
double subnet_margin(const tlp::SubNet& net, tlp::SubNetArch arch, const Tensor& x) {
  return arch == tlp::SubNetArch::standard ? min_abs(kernels::conv1d(x, net.depthwise)) : 1e300;
}

double bottleneck_margin(tlp::Bottleneck b, Tape& tape, Var s_w, Var d_w, bool training) {
  Var h = kernels::conv1d(tape, kernels::concat_channels(s_w, d_w), b.conv);
  return min_abs(kernels::normalize(NormKind::batch, tape, h, b.norm, training).value());
}

// Every ReLU of one layer: both sub-nets and the bottleneck fusion.
double tlp_margin(tlp::TlpParams p, const Tensor& x, bool training) {
  Tape tape;
  const tlp::TlpOutput out = tlp::tlp_forward(tape, tape.constant(x), p, training);
  double m = std::min(subnet_margin(p.predictor, p.config.arch, out.lift.x_even.value()),
                      subnet_margin(p.updater, p.config.arch, out.lift.d.value()));
  if (p.bottleneck) {
    m = std::min(m, bottleneck_margin(*p.bottleneck, tape, out.s_weighted, out.d_weighted, training));
    // fuse cases feed the raw split straight into the bottleneck
    const tlp::SplitVars raw = tlp::split(tape.constant(x));
    m = std::min(m, bottleneck_margin(*p.bottleneck, tape, raw.odd, raw.even, training));
  }
  return m;
}

// Smallest |pre-activation| over both backbone ReLUs in eval mode; the
// model's slots must hold TLP layers.
double relu_margin(SequenceModel& m, const Tensor& x) {
  Tape tape;
  Var z1 = kernels::conv1d(tape, tape.constant(x), m.conv1);
  Var h1 = kernels::activate(Activation::relu, z1);
  Var y1 = tlp::tlp_forward(tape, h1, *m.slots[0].tlp, false).y;
  Var z2 = kernels::conv1d(tape, y1, m.conv2);
  Var h2 = kernels::activate(Activation::relu, z2);
  return std::min({min_abs(z1.value()), min_abs(z2.value()), tlp_margin(*m.slots[0].tlp, h1.value(), false),
                   tlp_margin(*m.slots[1].tlp, h2.value(), false)});
}

struct Case {
  std::string name;
  bool composition = false;
  std::function<double(std::uint64_t seed, double eps)> run;
};

std::mt19937_64 case_rng(std::uint64_t seed, const std::string& name) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (char ch : name) words.push_back(static_cast<unsigned char>(ch));
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

// Op applied to tape.param(x), reduced with a fixed random projection.
Case unary_case(std::string name, Shape shape, std::function<Var(Tape&, Var)> op, double lo = -1.0, double hi = 1.0) {
  return Case{name, false, [=](std::uint64_t seed, double eps) {
                std::mt19937_64 rng = case_rng(seed, name);
                Tensor x = random_tensor(rng, shape, lo, hi);
                Tape probe;
                const Shape out_shape = op(probe, probe.param(x)).value().shape();
                Tensor proj = random_tensor(rng, out_shape);
                ScalarBuilder build = [&](Tape& tape) { return kernels::dot(op(tape, tape.param(x)), proj); };
                return leaf_gradient_error(build, {&x}, eps);
              }};
}

Case conv_case(std::string name, std::size_t c_in, std::size_t c_out, std::size_t width, std::size_t groups,
               std::size_t len) {
  return Case{name, false, [=](std::uint64_t seed, double eps) {
                std::mt19937_64 rng = case_rng(seed, name);
                Tensor x = random_tensor(rng, {2, c_in, len});
                Tensor w = random_tensor(rng, {c_out, c_in / groups, width});
                Tensor b = random_tensor(rng, {c_out});
                Tensor proj = random_tensor(rng, {2, c_out, len});
                ScalarBuilder build = [&](Tape& tape) {
                  return kernels::dot(kernels::conv1d(tape.param(x), tape.param(w), tape.param(b), groups), proj);
                };
                return leaf_gradient_error(build, {&x, &w, &b}, eps);
              }};
}

Case norm_case(std::string name, NormKind kind, bool training) {
  return Case{name, false, [=](std::uint64_t seed, double eps) {
                std::mt19937_64 rng = case_rng(seed, name);
                Tensor x = random_tensor(rng, {3, 2, 7});
                kernels::NormParams np = kernels::make_norm(2);
                np.gamma = random_tensor(rng, {2}, 0.5, 1.5);
                np.beta = random_tensor(rng, {2});
                np.running_mean = random_tensor(rng, {2});
                np.running_var = random_tensor(rng, {2}, 0.5, 1.5);
                Tensor proj = random_tensor(rng, {3, 2, 7});
                ScalarBuilder build = [&](Tape& tape) {
                  kernels::NormParams local = np;
                  Var y = kind == NormKind::instance
                              ? kernels::instance_norm(tape.param(x), tape.param(np.gamma), tape.param(np.beta), np.eps)
                          : training ? kernels::batch_norm_train(tape.param(x), tape.param(np.gamma),
                                                                 tape.param(np.beta), local)
                                     : kernels::batch_norm_eval(tape.param(x), tape.param(np.gamma),
                                                                tape.param(np.beta), np);
                  return kernels::dot(y, proj);
                };
                return leaf_gradient_error(build, {&x, &np.gamma, &np.beta}, eps);
              }};
}

Case binary_case(std::string name, std::function<Var(Var, Var)> op) {
  return Case{name, false, [=](std::uint64_t seed, double eps) {
                std::mt19937_64 rng = case_rng(seed, name);
                Tensor a = random_tensor(rng, {2, 3, 5});
                Tensor b = random_tensor(rng, {2, 3, 5});
                Tape probe;
                Tensor proj = random_tensor(rng, op(probe.param(a), probe.param(b)).value().shape());
                ScalarBuilder build = [&](Tape& tape) { return kernels::dot(op(tape.param(a), tape.param(b)), proj); };
                return leaf_gradient_error(build, {&a, &b}, eps);
              }};
}

tlp::TlpConfig small_config(std::size_t channels) {
  tlp::TlpConfig c;
  c.channels = channels;
  return c;
}

// Random-theta TLP layer; `reduce` maps the layer output to a scalar.
Case tlp_case(std::string name, bool composition, tlp::TlpConfig config, std::size_t batch, std::size_t len,
              std::function<Var(Tape&, Var, tlp::TlpParams&, const Tensor&)> reduce) {
  return Case{name, composition, [=](std::uint64_t seed, double eps) {
                std::mt19937_64 rng = case_rng(seed, name);
                tlp::TlpParams p = tlp::make_tlp(config, rng);
                randomize(p, rng);
                Tensor x = random_tensor(rng, {batch, config.channels, len});
                while (tlp_margin(p, x, true) < kKinkMargin) x = random_tensor(rng, {batch, config.channels, len});
                Tensor proj = random_tensor(rng, {batch, config.out_channels(), kernels::halved_length(len)});
                // Training-mode norms read batch statistics, so the running
                // averages they update do not feed back into the output.
                ScalarBuilder build = [&](Tape& tape) { return reduce(tape, tape.param(x), p, proj); };
                std::vector<Tensor*> leaves = tlp_leaves(p);
                leaves.push_back(&x);
                return leaf_gradient_error(build, leaves, eps);
              }};
}

Var training_loss(Tape& tape, Var x, tlp::TlpParams& p, const Tensor& proj) {
  tlp::TlpOutput out = tlp::tlp_forward(tape, x, p, true);
  Var task = kernels::dot(out.y, proj);
  const tlp::LiftLosses layer{out.c_u, out.c_p};
  // Large alphas so the lifting terms are not drowned by the task term.
  return tlp::total_loss(task, std::span(&layer, 1), 0.7, 0.3);
}

std::vector<Case> all_cases() {
  std::vector<Case> cases;
  cases.push_back(conv_case("conv1d", 3, 4, 5, 1, 9));
  cases.push_back(conv_case("conv1d_depthwise", 4, 4, 5, 4, 9));
  cases.push_back(conv_case("conv1d_pointwise", 3, 2, 1, 1, 6));
  cases.push_back(conv_case("conv1d_grouped_wide", 4, 6, 7, 2, 5));
  for (auto [name, kind] : {std::pair{"relu", Activation::relu}, {"tanh", Activation::tanh},
                            {"sigmoid", Activation::sigmoid}}) {
    cases.push_back(unary_case(name, {2, 3, 6}, [kind](Tape&, Var x) { return kernels::activate(kind, x); }));
  }
  cases.push_back(norm_case("instance_norm", NormKind::instance, true));
  cases.push_back(norm_case("batch_norm_train", NormKind::batch, true));
  cases.push_back(norm_case("batch_norm_eval", NormKind::batch, false));
  cases.push_back(binary_case("add", kernels::add));
  cases.push_back(binary_case("sub", kernels::sub));
  cases.push_back(binary_case("mul", kernels::mul));
  cases.push_back(binary_case("residual_weight", kernels::residual_weight));
  cases.push_back(binary_case("concat_channels", kernels::concat_channels));
  cases.push_back(binary_case("mean_squared_error", kernels::mean_squared_error));
  cases.push_back(unary_case("scale", {2, 3, 5}, [](Tape&, Var x) { return kernels::scale(x, -1.7); }));
  cases.push_back(unary_case("mean_over_time", {2, 3, 5}, [](Tape&, Var x) { return kernels::mean_over_time(x); }));
  cases.push_back(unary_case("sum", {2, 3, 5}, [](Tape&, Var x) { return kernels::sum(x); }));
  cases.push_back(unary_case("mean_square", {2, 3, 5}, [](Tape&, Var x) { return kernels::mean_square(x); }));
  cases.push_back(Case{"cross_entropy", false, [](std::uint64_t seed, double eps) {
                         std::mt19937_64 rng = case_rng(seed, "cross_entropy");
                         Tensor logits = random_tensor(rng, {5, 4, 1}, -2.0, 2.0);
                         std::vector<int> labels(5);
                         std::uniform_int_distribution<int> lab(0, 3);
                         for (int& l : labels) l = lab(rng);
                         ScalarBuilder build = [&](Tape& tape) {
                           return kernels::cross_entropy(tape.param(logits), labels);
                         };
                         return leaf_gradient_error(build, {&logits}, eps);
                       }});

  using pooling::PoolKind;
  using pooling::PoolMode;
  for (std::size_t len : {8u, 9u}) {
    const std::string suffix = len % 2 ? "_odd" : "";
    cases.push_back(unary_case("pool_max" + suffix, {2, 3, len},
                               [](Tape&, Var x) { return pooling::pool_fixed(PoolKind::max, x); }));
    cases.push_back(unary_case("pool_avg" + suffix, {2, 3, len},
                               [](Tape&, Var x) { return pooling::pool_fixed(PoolKind::average, x); }));
    cases.push_back(unary_case("pool_lp2" + suffix, {2, 3, len}, [](Tape&, Var x) { return pooling::pool_lp(x, 2.0); }));
    cases.push_back(unary_case("pool_soft" + suffix, {2, 3, len}, [](Tape&, Var x) { return pooling::pool_soft(x); }));
  }
  cases.push_back(unary_case("pool_lp3.5", {2, 3, 8}, [](Tape&, Var x) { return pooling::pool_lp(x, 3.5); }));
  cases.push_back(Case{"pool_mixed", false, [](std::uint64_t seed, double eps) {
                         std::mt19937_64 rng = case_rng(seed, "pool_mixed");
                         Tensor x = random_tensor(rng, {2, 3, 8});
                         Tensor logit = random_tensor(rng, {1}, -2.0, 2.0);
                         Tensor proj = random_tensor(rng, {2, 3, 4});
                         ScalarBuilder build = [&](Tape& tape) {
                           return kernels::dot(pooling::pool_mixed(tape.param(x), tape.param(logit)), proj);
                         };
                         return leaf_gradient_error(build, {&x, &logit}, eps);
                       }});
  for (auto [name, mode] : {std::pair{"pool_stochastic_train", PoolMode::train}, {"pool_stochastic_eval", PoolMode::eval}}) {
    cases.push_back(Case{name, false, [name = std::string(name), mode = mode](std::uint64_t seed, double eps) {
                           std::mt19937_64 rng = case_rng(seed, name);
                           Tensor x = random_tensor(rng, {2, 3, 8});
                           Tensor proj = random_tensor(rng, {2, 3, 4});
                           const std::uint64_t draw_seed = rng();
                           ScalarBuilder build = [&](Tape& tape) {
                             std::mt19937_64 draw(draw_seed);  // same samples for every evaluation
                             return kernels::dot(pooling::pool_stochastic(tape.param(x), draw, mode), proj);
                           };
                           return leaf_gradient_error(build, {&x}, eps);
                         }});
  }

  // TLP building blocks at random theta.
  cases.push_back(unary_case("split_odd_length", {2, 3, 9}, [](Tape&, Var x) {
    tlp::SplitVars s = tlp::split(x);
    return kernels::concat_channels(s.odd, kernels::scale(s.even, 2.0));
  }));
  for (auto [name, arch] : {std::pair{"predict", tlp::SubNetArch::standard}, {"predict_simple", tlp::SubNetArch::simple}}) {
    tlp::TlpConfig cfg = small_config(3);
    cfg.arch = arch;
    cases.push_back(Case{name, false, [name = std::string(name), cfg](std::uint64_t seed, double eps) {
                           std::mt19937_64 rng = case_rng(seed, name);
                           tlp::TlpParams p = tlp::make_tlp(cfg, rng);
                           randomize(p, rng);
                           Tensor x = random_tensor(rng, {2, 3, 6}, -2.0, 2.0);
                           while (subnet_margin(p.predictor, cfg.arch, x) < kKinkMargin) {
                             x = random_tensor(rng, {2, 3, 6}, -2.0, 2.0);
                           }
                           Tensor proj = random_tensor(rng, {2, 3, 6});
                           ScalarBuilder build = [&](Tape& tape) {
                             return kernels::dot(tlp::predict(tape, tape.param(x), p), proj);
                           };
                           std::vector<Tensor*> leaves{&x, &p.predictor.depthwise.weight,
                                                       &p.predictor.depthwise.bias};
                           if (cfg.arch == tlp::SubNetArch::standard) {
                             leaves.push_back(&p.predictor.pointwise.weight);
                             leaves.push_back(&p.predictor.pointwise.bias);
                           }
                           return leaf_gradient_error(build, leaves, eps);
                         }});
  }
  cases.push_back(Case{"update", false, [](std::uint64_t seed, double eps) {
                         std::mt19937_64 rng = case_rng(seed, "update");
                         tlp::TlpParams p = tlp::make_tlp(small_config(3), rng);
                         randomize(p, rng);
                         Tensor d = random_tensor(rng, {2, 3, 6}, -2.0, 2.0);
                         while (subnet_margin(p.updater, p.config.arch, d) < kKinkMargin) {
                           d = random_tensor(rng, {2, 3, 6}, -2.0, 2.0);
                         }
                         Tensor proj = random_tensor(rng, {2, 3, 6});
                         ScalarBuilder build = [&](Tape& tape) {
                           return kernels::dot(tlp::update(tape, tape.param(d), p), proj);
                         };
                         return leaf_gradient_error(build,
                                                    {&d, &p.updater.depthwise.weight, &p.updater.depthwise.bias,
                                                     &p.updater.pointwise.weight, &p.updater.pointwise.bias},
                                                    eps);
                       }});
  cases.push_back(tlp_case("lift", false, small_config(3), 2, 10, [](Tape&, Var x, tlp::TlpParams& p, const Tensor& proj) {
    tlp::LiftVars l = tlp::lift(*x.tape, x, p);
    return kernels::add(kernels::dot(l.s, proj), kernels::scale(kernels::dot(l.d, proj), -0.5));
  }));
  cases.push_back(tlp_case("lift_losses", false, small_config(3), 2, 10,
                           [](Tape&, Var x, tlp::TlpParams& p, const Tensor&) {
                             tlp::LiftVars l = tlp::lift(*x.tape, x, p);
                             tlp::LiftLosses ll = tlp::lift_losses(l.s, l.d, l.x_odd);
                             return kernels::add(ll.c_u, kernels::scale(ll.c_p, 0.5));
                           }));
  cases.push_back(tlp_case("component_weight", false, small_config(3), 2, 10,
                           [](Tape& tape, Var x, tlp::TlpParams& p, const Tensor& proj) {
                             tlp::SplitVars s = tlp::split(x);
                             return kernels::dot(tlp::component_weight(tape, s.odd, p.weight_s, p.config, true), proj);
                           }));
  {
    tlp::TlpConfig direct = small_config(3);
    direct.weighting_form = tlp::WeightingForm::direct;
    cases.push_back(tlp_case("component_weight_direct", false, direct, 2, 10,
                             [](Tape& tape, Var x, tlp::TlpParams& p, const Tensor& proj) {
                               tlp::SplitVars s = tlp::split(x);
                               return kernels::dot(tlp::component_weight(tape, s.odd, p.weight_s, p.config, true),
                                                   proj);
                             }));
  }
  for (auto [name, fusion] : {std::pair{"fuse_sum", tlp::Fusion::sum}, {"fuse_concat", tlp::Fusion::concat},
                              {"fuse_bottleneck", tlp::Fusion::bottleneck}}) {
    tlp::TlpConfig cfg = small_config(3);
    cfg.fusion = fusion;
    cases.push_back(tlp_case(name, false, cfg, 2, 10, [](Tape& tape, Var x, tlp::TlpParams& p, const Tensor& proj) {
      tlp::SplitVars s = tlp::split(x);
      tlp::Bottleneck* b = p.bottleneck ? &*p.bottleneck : nullptr;
      return kernels::dot(tlp::fuse(tape, p.config.fusion, s.odd, s.even, b, true), proj);
    }));
  }

  // Full layer plus the weighted lifting losses.
  struct Variant {
    const char* name;
    tlp::TlpConfig config;
    std::size_t len;
  };
  std::vector<Variant> variants;
  variants.push_back({"tlp_forward_loss", small_config(3), 12});
  variants.push_back({"tlp_forward_loss_odd_length", small_config(2), 11});
  {
    tlp::TlpConfig c = small_config(3);
    c.fusion = tlp::Fusion::bottleneck;
    variants.push_back({"tlp_forward_loss_bottleneck", c, 10});
    c = small_config(2);
    c.fusion = tlp::Fusion::concat;
    c.sharing = tlp::WeightingSharing::shared;
    variants.push_back({"tlp_forward_loss_concat_shared", c, 10});
    c = small_config(2);
    c.arch = tlp::SubNetArch::simple;
    c.kernel = 3;
    c.weighting_norm = NormKind::batch;
    variants.push_back({"tlp_forward_loss_simple_bn", c, 10});
  }
  for (const auto& v : variants) cases.push_back(tlp_case(v.name, true, v.config, 2, v.len, training_loss));

  cases.push_back(Case{"sequence_model_loss", true, [](std::uint64_t seed, double eps) {
                         std::mt19937_64 rng = case_rng(seed, "sequence_model_loss");
                         ModelConfig mc;
                         mc.in_channels = 2;
                         mc.hidden = 3;
                         mc.classes = 3;
                         SequenceModel m = build_model(mc, rng());
                         for (auto& slot : m.slots) randomize(*slot.tlp, rng);
                         std::vector<Tensor*> leaves;
                         m.visit([&](const std::string&, Tensor& t) { leaves.push_back(&t); });
                         Tensor x = random_tensor(rng, {2, 2, 12});
                         while (relu_margin(m, x) < kKinkMargin) x = random_tensor(rng, {2, 2, 12});
                         leaves.push_back(&x);
                         const std::vector<int> labels{0, 2};
                         ScalarBuilder build = [&](Tape& tape) {
                           ForwardResult fr = forward(tape, m, tape.param(x), false, rng);
                           Var task = kernels::cross_entropy(fr.logits, labels);
                           return tlp::total_loss(task, fr.lift_losses, 0.5, 0.5);
                         };
                         return leaf_gradient_error(build, leaves, eps);
                       }});
  return cases;
}

}  // namespace

double leaf_gradient_error(const ScalarBuilder& build, const std::vector<Tensor*>& leaves, double eps) {
  std::size_t total = 0;
  for (const Tensor* leaf : leaves) total += leaf->size();
  // One flat vector over all leaves: biases that feed a normalization have
  // an exactly zero gradient and would make a per-leaf ratio meaningless.
  Tensor taped({total}), numeric({total});
  {
    Tape tape;
    Var loss = build(tape);
    tape.backward(loss);
    std::size_t k = 0;
    for (Tensor* leaf : leaves) {
      const Tensor g = tape.param_grad(*leaf);
      for (double v : g.values()) taped[k++] = v;
    }
  }
  std::size_t k = 0;
  for (Tensor* leaf : leaves) {
    for (std::size_t i = 0; i < leaf->size(); ++i) {
      const double saved = (*leaf)[i];
      (*leaf)[i] = saved + eps;
      const double up = evaluate_scalar(build);
      (*leaf)[i] = saved - eps;
      const double down = evaluate_scalar(build);
      (*leaf)[i] = saved;
      numeric[k++] = (up - down) / (2.0 * eps);
    }
  }
  return kernels::relative_error(taped, numeric);
}

std::vector<std::string> gradcheck_case_names() {
  std::vector<std::string> names;
  for (const auto& c : all_cases()) names.push_back(c.name);
  return names;
}

std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options, const std::vector<std::string>& names) {
  std::vector<Case> cases = all_cases();
  std::vector<const Case*> selected;
  for (const auto& n : names) {
    auto it = std::find_if(cases.begin(), cases.end(), [&](const Case& c) { return c.name == n; });
    if (it == cases.end()) throw ConfigError("unknown gradcheck case '" + n + "'");
    selected.push_back(&*it);
  }
  std::vector<GradCheckResult> results;
  for (const Case* c : selected) {
    GradCheckResult r;
    r.name = c->name;
    r.composition = c->composition;
    r.seeds = options.seeds;
    r.tolerance = c->composition ? kCompositionTolerance : kOpTolerance;
    for (std::size_t s = 0; s < options.seeds; ++s) {
      r.max_rel_error = std::max(r.max_rel_error, c->run(options.base_seed + s, options.eps));
    }
    r.passed = r.max_rel_error < r.tolerance;
    results.push_back(r);
  }
  return results;
}

std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options) {
  return run_gradcheck(options, gradcheck_case_names());
}

}  // namespace liftpool::harness
