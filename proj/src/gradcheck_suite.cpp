#include "bridgepress/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "bridgepress/ils.hpp"
#include "bridgepress/losses.hpp"
#include "bridgepress/models.hpp"

namespace bridgepress {

namespace {

struct Case {
  const char* module;
  const char* name;
  std::function<GradcheckReport()> run;
};

/// Uniform values in [lo, hi] with a random sign when `signed_values`;
/// magnitudes stay at least `lo` away from zero so kinks are not probed.
Tensor random_param(Shape shape, Rng& rng, double lo = 0.1, double hi = 1.0,
                    bool signed_values = true) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::bernoulli_distribution coin(0.5);
  Vector v(shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) {
    v[i] = mag(rng) * (signed_values && coin(rng) ? -1.0 : 1.0);
  }
  return Tensor::parameter(std::move(shape), std::move(v));
}

Tensor random_constant(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(shape_size(shape));
  for (Index i = 0; i < v.size(); ++i) v[i] = u(rng);
  return Tensor::constant(std::move(shape), std::move(v));
}

/// Scalar projection sum(x * r) with a fixed random r.
Tensor project(const Tensor& x, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(x * random_constant(x.shape(), rng));
}

std::vector<Tensor> with(const ParamSet& params, std::vector<Tensor> extra = {}) {
  for (const auto& [name, p] : params) extra.push_back(p);
  return extra;
}

GradcheckReport worst(const GradcheckReport& a, const GradcheckReport& b) {
  return {std::max(a.max_relative_error, b.max_relative_error),
          a.coordinates_checked + b.coordinates_checked};
}

GradcheckReport unary(Tensor (*op)(const Tensor&), double lo, double hi, bool signed_values) {
  Rng rng(1);
  Tensor x = random_param({3, 4}, rng, lo, hi, signed_values);
  return gradcheck([=] { return project(op(x)); }, {x});
}

std::vector<Case> cases() {
  std::vector<Case> c;
  // --- tensorcore primitives -------------------------------------------
  c.push_back({"tensorcore", "add_sub_mul_div", [] {
                 Rng rng(2);
                 Tensor a = random_param({3, 4}, rng), b = random_param({3, 4}, rng, 0.5, 1.5);
                 return gradcheck([=] { return project((a + b) * (a - b) / b); }, {a, b});
               }});
  c.push_back({"tensorcore", "scale_shift_neg", [] {
                 Rng rng(3);
                 Tensor a = random_param({2, 5}, rng);
                 return gradcheck([=] { return project(-add_scalar(2.5 * a, 0.3)); }, {a});
               }});
  c.push_back({"tensorcore", "square", [] { return unary(square, 0.1, 1.0, true); }});
  c.push_back({"tensorcore", "abs", [] { return unary(abs, 0.1, 1.0, true); }});
  c.push_back({"tensorcore", "exp", [] { return unary(exp, 0.1, 1.0, true); }});
  c.push_back({"tensorcore", "log", [] { return unary(log, 0.2, 2.0, false); }});
  c.push_back({"tensorcore", "sqrt", [] { return unary(sqrt, 0.2, 2.0, false); }});
  c.push_back({"tensorcore", "tanh", [] { return unary(tanh, 0.1, 1.5, true); }});
  c.push_back({"tensorcore", "sigmoid", [] { return unary(sigmoid, 0.1, 2.0, true); }});
  c.push_back({"tensorcore", "relu", [] { return unary(relu, 0.1, 1.0, true); }});
  c.push_back({"tensorcore", "leaky_relu", [] {
                 Rng rng(4);
                 Tensor x = random_param({3, 4}, rng);
                 return gradcheck([=] { return project(leaky_relu(x, 0.2)); }, {x});
               }});
  c.push_back({"tensorcore", "sum_mean", [] {
                 Rng rng(5);
                 Tensor x = random_param({4, 3}, rng);
                 return gradcheck([=] { return square(sum(x)) + 3.0 * square(mean(x)); }, {x});
               }});
  c.push_back({"tensorcore", "matmul_transpose", [] {
                 Rng rng(6);
                 Tensor a = random_param({3, 4}, rng), b = random_param({3, 5}, rng);
                 return gradcheck([=] { return project(matmul(transpose(a), b)); }, {a, b});
               }});
  c.push_back({"tensorcore", "add_rowwise", [] {
                 Rng rng(7);
                 Tensor a = random_param({4, 3}, rng), r = random_param({3}, rng);
                 return gradcheck([=] { return project(square(add_rowwise(a, r))); }, {a, r});
               }});
  c.push_back({"tensorcore", "reshape_concat_slice", [] {
                 Rng rng(8);
                 Tensor a = random_param({2, 3, 4}, rng), b = random_param({2, 2, 4}, rng);
                 return gradcheck(
                     [=] {
                       const Tensor j = concat({a, b}, 1);
                       const Tensor k = concat({slice(j, 1, 1, 4), reshape(a, {2, 3, 4})}, 1);
                       return project(square(k));
                     },
                     {a, b});
               }});
  c.push_back({"tensorcore", "concat_axis0", [] {
                 Rng rng(9);
                 Tensor a = random_param({2, 3}, rng), b = random_param({1, 3}, rng);
                 return gradcheck([=] { return project(square(concat({a, b}, 0))); }, {a, b});
               }});
  c.push_back({"tensorcore", "softmax_rows", [] {
                 Rng rng(10);
                 Tensor x = random_param({3, 5}, rng, 0.1, 2.0);
                 return gradcheck([=] { return project(softmax(x, 1)); }, {x});
               }});
  c.push_back({"tensorcore", "softmax_cols", [] {
                 Rng rng(11);
                 Tensor x = random_param({4, 3}, rng, 0.1, 2.0);
                 return gradcheck([=] { return project(softmax(x, 0)); }, {x});
               }});
  c.push_back({"tensorcore", "layer_norm", [] {
                 Rng rng(12);
                 Tensor x = random_param({3, 6}, rng);
                 return gradcheck([=] { return project(layer_norm(x)); }, {x});
               }});
  c.push_back({"tensorcore", "layer_norm_affine", [] {
                 Rng rng(13);
                 Tensor x = random_param({3, 6}, rng), s = random_param({6}, rng),
                        o = random_param({6}, rng);
                 return gradcheck([=] { return project(layer_norm(x, s, o)); }, {x, s, o});
               }});
  c.push_back({"tensorcore", "conv2d_same", [] {
                 Rng rng(14);
                 Tensor x = random_param({2, 5, 6}, rng), w = random_param({3, 2, 3, 3}, rng),
                        b = random_param({3}, rng);
                 return gradcheck([=] { return project(conv2d(x, w, b, 1, 1)); }, {x, w, b});
               }});
  c.push_back({"tensorcore", "conv2d_strided", [] {
                 Rng rng(15);
                 Tensor x = random_param({2, 7, 8}, rng), w = random_param({2, 2, 3, 3}, rng);
                 return gradcheck([=] { return project(conv2d(x, w, Tensor(), 2, 1)); }, {x, w});
               }});
  c.push_back({"tensorcore", "upsample_crop", [] {
                 Rng rng(16);
                 Tensor x = random_param({2, 3, 4}, rng);
                 return gradcheck([=] { return project(square(crop2d(upsample2x(x), 5, 7))); }, {x});
               }});
  c.push_back({"tensorcore", "bce_with_logits", [] {
                 Rng rng(17);
                 Tensor x = random_param({1, 3, 4}, rng, 0.1, 3.0);
                 return gradcheck([=] { return bce_with_logits(x, 0.9) + bce_with_logits(x, 0.1); },
                                  {x});
               }});
  c.push_back({"tensorcore", "multi_head_attention", [] {
                 Rng rng(18);
                 AttentionWeights w = AttentionWeights::init(4, rng);
                 Tensor q = random_param({5, 4}, rng), kv = random_param({3, 4}, rng);
                 ParamSet set;
                 w.register_params(set, "mha");
                 return gradcheck([=] { return project(multi_head_attention(q, kv, kv, w, 2)); },
                                  with(set, {q, kv}));
               }});

  // --- ILS -------------------------------------------------------------
  auto ils_fixture = [](std::uint64_t seed) {
    Rng rng(seed);
    return InformedLatentSpace(IlsConfig{4, 2}, rng);
  };
  const AnthroScale scale{110.0, 1.95};
  const AnthroRecord anthro{72.5, 1.71, 1};
  c.push_back({"ils", "embed", [=] {
                 InformedLatentSpace ils = ils_fixture(20);
                 ParamSet set;
                 ils.register_params(set, "ils");
                 return gradcheck([=] { return project(square(ils.embed(anthro, scale))); },
                                  with(set));
               }});
  c.push_back({"ils", "self_attend", [=] {
                 InformedLatentSpace ils = ils_fixture(21);
                 Rng rng(22);
                 Tensor tokens = random_param({3, 4}, rng);
                 ParamSet set;
                 ils.register_params(set, "ils");
                 return gradcheck([=] { return project(ils.self_attend(tokens)); }, with(set, {tokens}));
               }});
  c.push_back({"ils", "inform", [=] {
                 InformedLatentSpace ils = ils_fixture(23);
                 Rng rng(24);
                 Tensor z = random_param({4, 2, 3}, rng), tokens = random_param({3, 4}, rng);
                 ParamSet set;
                 ils.register_params(set, "ils");
                 return gradcheck([=] { return project(ils.inform(z, tokens)); },
                                  with(set, {z, tokens}));
               }});
  c.push_back({"ils", "end_to_end", [=] {
                 InformedLatentSpace ils = ils_fixture(25);
                 Rng rng(26);
                 Tensor z = random_param({4, 3, 2}, rng);
                 ParamSet set;
                 ils.register_params(set, "ils");
                 return gradcheck([=] { return project(ils(z, anthro, scale)); }, with(set, {z}));
               }});

  // --- losses ------------------------------------------------------------
  c.push_back({"losses", "ssim_index", [] {
                 Rng rng(30);
                 Tensor a = random_param({1, 13, 14}, rng, 0.05, 1.0, false);
                 Tensor b = random_param({1, 13, 14}, rng, 0.05, 1.0, false);
                 return gradcheck([=] { return ssim_index(a, b); }, {a, b});
               }});
  c.push_back({"losses", "wol", [] {
                 Rng rng(31);
                 Tensor p = random_param({1, 4, 5}, rng, 0.1, 1.0, false);
                 Tensor q = random_param({1, 4, 5}, rng, 1.1, 2.0, false);
                 return gradcheck([=] { return wol_loss(p, q, 37.5); }, {p, q});
               }});
  c.push_back({"losses", "discriminator_cond", [] {
                 Rng rng(32);
                 Tensor real = random_param({1, 3, 4}, rng), fake = random_param({1, 3, 4}, rng);
                 return gradcheck([=] { return discriminator_loss(real, fake, LossWeights{}); },
                                  {real, fake});
               }});
  c.push_back({"losses", "generator_cond", [] {
                 Rng rng(33);
                 Tensor logits = random_param({1, 3, 4}, rng);
                 Tensor p_hat = random_param({1, 12, 12}, rng, 0.05, 1.0, false);
                 Tensor p = random_constant({1, 12, 12}, rng, 0.0, 1.0);
                 LossWeights w;
                 w.gamma = 0.5;
                 return gradcheck(
                     [=] { return generator_loss(logits, p_hat, p, w, 40.0).total; },
                     {logits, p_hat});
               }});
  c.push_back({"losses", "end_to_end_conditional", [=] {
                 GeneratorConfig gc;
                 gc.input_rows = 24;
                 gc.input_cols = 24;
                 gc.output_rows = 12;
                 gc.output_cols = 12;
                 gc.stem_channels = 2;
                 gc.mid_channels = 3;
                 gc.latent_channels = 4;
                 Generator g(gc, 34);
                 Discriminator d({2, 2}, 35);
                 Rng rng(36);
                 ConditionalExample ex;
                 ex.depth = random_constant({1, 24, 24}, rng, 0.05, 0.95);
                 ex.depth_condition = random_constant({1, 12, 12}, rng, 0.05, 0.95);
                 ex.target.values = Grid(12, 12);
                 const Tensor t = random_constant({12 * 12}, rng, 0.0, 0.5);
                 Eigen::Map<Vector>(ex.target.values.data(), 144) = t.values();
                 ex.target.normalized = true;
                 ex.target.divisor_kpa = 20.0;
                 ex.target.taxel_area_m2 = 1e-3;
                 ex.anthro = anthro;
                 ParamSet params = g.params();
                 params.merge(d.params());
                 LossWeights w;
                 w.gamma = 0.2;
                 // L_D sees a detached generator output, so it is checked
                 // against the critic alone.
                 return worst(
                     gradcheck([=] { return loss_generator_cond(ex, g, d, w, scale).total; },
                               with(params)),
                     gradcheck([=] { return loss_discriminator_cond(ex, g, d, w, scale); },
                               with(d.params())));
               }});
  c.push_back({"losses", "unconditional_pair", [=] {
                 GeneratorConfig gc;
                 gc.input_rows = gc.output_rows = 12;
                 gc.input_cols = gc.output_cols = 12;
                 gc.stem_channels = 2;
                 gc.mid_channels = 3;
                 gc.latent_channels = 4;
                 gc.skips.clear();
                 gc.neck_channels = 2;
                 Generator g(gc, 37);
                 Discriminator d({1, 2}, 38);
                 Rng rng(39);
                 Tensor x = random_constant({1, 12, 12}, rng, 0.05, 0.95);
                 ParamSet params = g.params();
                 params.merge(d.params());
                 return worst(
                     gradcheck(
                         [=] {
                           return loss_unconditional_pair(x, anthro, g, d, LossWeights{}, scale)
                               .second.total;
                         },
                         with(params)),
                     gradcheck(
                         [=] {
                           return loss_unconditional_pair(x, anthro, g, d, LossWeights{}, scale)
                               .first;
                         },
                         with(d.params())));
               }});

  // --- models ------------------------------------------------------------
  c.push_back({"models", "generator_skips_ils", [=] {
                 GeneratorConfig gc;
                 gc.input_rows = 16;
                 gc.input_cols = 18;
                 gc.output_rows = 8;
                 gc.output_cols = 9;
                 gc.stem_channels = 2;
                 gc.mid_channels = 3;
                 gc.latent_channels = 4;
                 Generator g(gc, 40);
                 Rng rng(41);
                 Tensor x = random_param({1, 16, 18}, rng, 0.05, 0.95, false);
                 return gradcheck([=] { return project(g.forward(x, anthro, scale)); },
                                  with(g.params(), {x}));
               }});
  c.push_back({"models", "autoencoder_neck", [=] {
                 GeneratorConfig gc;
                 gc.input_rows = gc.output_rows = 8;
                 gc.input_cols = gc.output_cols = 8;
                 gc.stem_channels = 2;
                 gc.mid_channels = 3;
                 gc.latent_channels = 4;
                 gc.skips.clear();
                 gc.neck_channels = 2;
                 gc.use_ils = false;
                 Generator g(gc, 42);
                 Rng rng(43);
                 Tensor x = random_param({1, 8, 8}, rng, 0.05, 0.95, false);
                 return gradcheck([=] { return project(g.forward(x, std::nullopt, scale)); },
                                  with(g.params(), {x}));
               }});
  c.push_back({"models", "discriminator", [] {
                 Discriminator d({2, 3}, 44);
                 Rng rng(45);
                 Tensor cond = random_param({1, 8, 8}, rng), img = random_param({1, 8, 8}, rng);
                 return gradcheck([=] { return project(d.forward(cond, img)); },
                                  with(d.params(), {cond, img}));
               }});
  c.push_back({"models", "denoiser", [=] {
                 DenoiserConfig dc;
                 dc.base_channels = 2;
                 dc.mid_channels = 4;
                 dc.time_frequencies = 3;
                 Denoiser den(dc, 46);
                 Rng rng(47);
                 Tensor x = random_param({1, 7, 9}, rng), y = random_param({1, 7, 9}, rng);
                 return gradcheck([=] { return project(den.forward(x, y, 17, std::nullopt, scale)); },
                                  with(den.params(), {x, y}));
               }});
  c.push_back({"models", "denoiser_ils", [=] {
                 DenoiserConfig dc;
                 dc.channels = 2;
                 dc.base_channels = 2;
                 dc.mid_channels = 4;
                 dc.time_frequencies = 3;
                 dc.use_ils = true;
                 Denoiser den(dc, 48);
                 Rng rng(49);
                 Tensor x = random_param({2, 6, 8}, rng), y = random_param({2, 6, 8}, rng);
                 return gradcheck([=] { return project(den.forward(x, y, 300, anthro, scale)); },
                                  with(den.params(), {x, y}));
               }});
  c.push_back({"models", "bridge_objective", [=] {
                 DenoiserConfig dc;
                 dc.base_channels = 2;
                 dc.mid_channels = 4;
                 dc.time_frequencies = 3;
                 Denoiser den(dc, 50);
                 Rng rng(51);
                 Tensor x = random_constant({1, 6, 6}, rng), y = random_constant({1, 6, 6}, rng);
                 Tensor target = random_constant({1, 6, 6}, rng);
                 return gradcheck(
                     [=] { return mean(square(den.forward(x, y, 5, std::nullopt, scale) - target)); },
                     with(den.params()));
               }});
  return c;
}

}  // namespace

const std::vector<std::string>& gradcheck_modules() {
  static const std::vector<std::string> modules{"tensorcore", "ils", "losses", "models"};
  return modules;
}

std::vector<GradcheckCase> run_gradcheck_suite(const std::string& module, double tolerance) {
  const auto& known = gradcheck_modules();
  if (!module.empty() && std::find(known.begin(), known.end(), module) == known.end()) {
    throw ConfigError("unknown gradcheck module '" + module + "'");
  }
  std::vector<GradcheckCase> out;
  for (const Case& c : cases()) {
    if (!module.empty() && module != c.module) continue;
    GradcheckCase r;
    r.module = c.module;
    r.name = c.name;
    r.report = c.run();
    r.passed = r.report.max_relative_error < tolerance;
    out.push_back(r);
  }
  return out;
}

}  // namespace bridgepress
