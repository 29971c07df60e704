#include "gradcheck.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include "kdvqa/error.h"
#include "kdvqa/losses.h"
#include "kdvqa/model.h"
#include "kdvqa/ops.h"
#include "kdvqa/rng.h"

#if !defined(KDVQA_REAL_DOUBLE)
#error "gradcheck support must be compiled with KDVQA_REAL_DOUBLE"
#endif

namespace kdvqa::testing {
namespace {

constexpr double kStep = 1e-3;

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  std::vector<Real> values(shape_numel(shape));
  for (auto& v : values) v = scale * (2.0 * rng.uniform() - 1.0);
  return Tensor(shape, std::move(values), true);
}

std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) {
  return static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Projects the output onto a fixed random direction so every output element
// contributes to the scalar being differentiated.
GradcheckCase check(const std::string& kernel, const std::vector<Tensor>& inputs, const Fn& fn, Rng& rng) {
  GradcheckCase result;
  result.kernel = kernel;
  for (const auto& t : inputs) {
    if (!result.shape.empty()) result.shape += " ";
    result.shape += shape_string(t.shape());
  }
  Tensor direction;
  {
    NoGradGuard no_grad;
    direction = random_tensor(fn(inputs).shape(), rng);
    direction.set_requires_grad(false);
  }
  auto objective = [&]() { return sum(mul(fn(inputs), direction)); };

  for (auto t : inputs) t.zero_grad();
  objective().backward();
  std::vector<std::vector<Real>> analytic;
  for (const auto& t : inputs) {
    if (!t.requires_grad()) {
      analytic.emplace_back();
      continue;
    }
    const auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
  }

  NoGradGuard no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor t = inputs[i];
    if (!t.requires_grad()) continue;
    auto data = t.data();
    for (std::size_t j = 0; j < data.size(); ++j) {
      const Real saved = data[j];
      data[j] = saved + kStep;
      const double plus = objective().item();
      data[j] = saved - kStep;
      const double minus = objective().item();
      data[j] = saved;
      const double numeric = (plus - minus) / (2 * kStep);
      result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic[i][j], numeric));
      ++result.checked;
    }
  }
  return result;
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck_suite(std::uint64_t seed, int shapes) {
  Rng rng(derive_seed(seed, {hash_tag("gradcheck")}));
  std::vector<GradcheckCase> out;
  for (int s = 0; s < shapes; ++s) {
    const std::size_t m = dim(rng, 1, 4), k = dim(rng, 1, 4), n = dim(rng, 1, 4), g = dim(rng, 1, 3);

    out.push_back(check("matmul", {random_tensor({m, k}, rng), random_tensor({k, n}, rng)},
                        [](const auto& x) { return matmul(x[0], x[1]); }, rng));
    out.push_back(check("matmul_batched_transposed",
                        {random_tensor({g, k, m}, rng), random_tensor({g, n, k}, rng)},
                        [](const auto& x) { return matmul(x[0], x[1], true, true); }, rng));
    out.push_back(check("add", {random_tensor({m, n}, rng), random_tensor({m, n}, rng)},
                        [](const auto& x) { return add(x[0], x[1]); }, rng));
    out.push_back(check("mul", {random_tensor({m, n}, rng), random_tensor({m, n}, rng)},
                        [](const auto& x) { return mul(x[0], x[1]); }, rng));
    out.push_back(check("scale", {random_tensor({m, n}, rng)},
                        [](const auto& x) { return scale(x[0], Real(-1.7)); }, rng));
    out.push_back(check("add_bias", {random_tensor({g, m, n}, rng), random_tensor({n}, rng)},
                        [](const auto& x) { return add_bias(x[0], x[1]); }, rng));
    out.push_back(check("scale_shift",
                        {random_tensor({m, n}, rng), random_tensor({n}, rng), random_tensor({n}, rng)},
                        [](const auto& x) { return scale_shift(x[0], x[1], x[2]); }, rng));
    out.push_back(check("transpose", {random_tensor({g, m, n}, rng)},
                        [](const auto& x) { return transpose(x[0]); }, rng));
    out.push_back(check("reshape", {random_tensor({m, n * g}, rng)},
                        [=](const auto& x) { return reshape(x[0], {m * n, g}); }, rng));
    out.push_back(check("permute", {random_tensor({g, m, n, k}, rng)},
                        [](const auto& x) { return permute(x[0], {0, 2, 1, 3}); }, rng));

    std::vector<int> ids;
    const std::size_t rows = dim(rng, 2, 6);
    for (std::size_t i = 0; i < dim(rng, 1, 5); ++i) ids.push_back(static_cast<int>(rng.uniform_index(rows)));
    out.push_back(check("embedding_lookup", {random_tensor({rows, n}, rng)},
                        [ids](const auto& x) { return embedding_lookup(x[0], ids); }, rng));

    const std::size_t softmax_axis = rng.uniform_index(3);
    out.push_back(check("softmax", {random_tensor({g, m + 1, n + 1}, rng, 3.0)},
                        [=](const auto& x) { return softmax(x[0], softmax_axis); }, rng));
    const std::size_t norm_axis = rng.uniform_index(2);
    out.push_back(check("layer_norm", {random_tensor({m + 1, n + 1}, rng, 2.0)},
                        [=](const auto& x) { return layer_norm(x[0], norm_axis); }, rng));
    out.push_back(check("layer_norm_affine",
                        {random_tensor({m, n + 1}, rng, 2.0), random_tensor({n + 1}, rng),
                         random_tensor({n + 1}, rng)},
                        [](const auto& x) { return layer_norm(x[0], x[1], x[2]); }, rng));
    out.push_back(check("gelu", {random_tensor({m, n}, rng, 3.0)},
                        [](const auto& x) { return gelu(x[0]); }, rng));

    const std::size_t axis = rng.uniform_index(2);
    const Shape a_shape = axis == 0 ? Shape{m, n} : Shape{n, m};
    const Shape b_shape = axis == 0 ? Shape{k, n} : Shape{n, k};
    out.push_back(check("concat", {random_tensor(a_shape, rng), random_tensor(b_shape, rng)},
                        [=](const auto& x) { return concat({x[0], x[1]}, axis); }, rng));
    const std::size_t extent = m + k;
    const std::size_t start = rng.uniform_index(extent);
    const std::size_t length = 1 + rng.uniform_index(extent - start);
    out.push_back(check("slice", {random_tensor({n, extent, g}, rng)},
                        [=](const auto& x) { return slice(x[0], 1, start, length); }, rng));
    out.push_back(check("sum", {random_tensor({m, n}, rng)}, [](const auto& x) { return sum(x[0]); }, rng));
    out.push_back(check("mean", {random_tensor({m, n}, rng)}, [](const auto& x) { return mean(x[0]); }, rng));

    const std::uint64_t dropout_seed = rng.next_u64();
    out.push_back(check("dropout", {random_tensor({m, n}, rng)},
                        [=](const auto& x) {
                          Rng r(dropout_seed);
                          return dropout(x[0], Real(0.3), r);
                        },
                        rng));

    const std::size_t heads = dim(rng, 1, 2), batch = dim(rng, 1, 2), keys = dim(rng, 2, 4);
    std::vector<int> lengths;
    for (std::size_t b = 0; b < batch; ++b) lengths.push_back(static_cast<int>(1 + rng.uniform_index(keys)));
    // Masked scores are constant, so softmax keeps the objective finite.
    out.push_back(check("mask_padded_keys", {random_tensor({batch * heads, m, keys}, rng)},
                        [=](const auto& x) { return softmax(mask_padded_keys(x[0], lengths, heads), 2); }, rng));
    out.push_back(check("linear", {random_tensor({m, k}, rng), random_tensor({k, n}, rng), random_tensor({n}, rng)},
                        [](const auto& x) { return linear(x[0], x[1], x[2]); }, rng));

    const std::size_t positions = dim(rng, 2, 5), vocab = dim(rng, 2, 7);
    std::vector<int> labels;
    for (std::size_t p = 0; p < positions; ++p) {
      labels.push_back(p > 0 && rng.bernoulli(0.3) ? -100 : static_cast<int>(rng.uniform_index(vocab)));
    }
    out.push_back(check("cross_entropy_masked", {random_tensor({positions, vocab}, rng, 3.0)},
                        [labels](const auto& x) { return cross_entropy_masked(x[0], labels); }, rng));
    std::vector<Real> targets;
    for (std::size_t i = 0; i < positions + 2; ++i) targets.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
    out.push_back(check("bce_with_logits", {random_tensor({positions + 2}, rng, 4.0)},
                        [targets](const auto& x) { return bce_with_logits(x[0], targets); }, rng));
  }
  return out;
}

GradcheckCase run_model_gradcheck(std::uint64_t seed, int samples) {
  EncoderConfig enc;
  enc.vocab_size = 12;
  enc.max_len = 8;
  enc.hidden = 8;
  enc.heads = 2;
  enc.ff = 16;
  enc.layers = 1;
  enc.dropout = 0.0;
  MatcherConfig mat;
  mat.layers = 1;
  mat.heads = 2;
  mat.hidden = 8;
  mat.ff = 16;
  mat.max_rois = 8;
  mat.dropout = 0.0;

  ParameterSet params = init_parameters(encoder_parameter_specs(enc), derive_seed(seed, {1}));
  params.merge(init_parameters(matcher_parameter_specs(mat), derive_seed(seed, {2})));
  // Larger weights than the 0.02 init so every path carries a visible gradient.
  Rng rng(derive_seed(seed, {3}));
  for (auto t : params.list()) {
    for (auto& v : t.data()) v += 0.3 * (2.0 * rng.uniform() - 1.0);
  }
  const Encoder encoder(enc, params);
  const Matcher matcher(mat, params);
  const std::vector<TokenSequence> rois = {{{kClsId, 5, 6, kSepId}}, {{kClsId, 7, kSepId}}, {{kClsId, 8, 9, 10, kSepId}}};
  const TokenSequence question{{kClsId, 11, 6, 9, kSepId}};
  const std::vector<Real> targets = {0.0, 1.0, 1.0};

  auto objective = [&]() {
    std::vector<Tensor> rows;
    for (const auto& r : rois) rows.push_back(slice(encoder.encode_sequence(r, nullptr), 0, 0, 1));
    return bce_with_logits(matcher.forward(concat(rows, 0), encoder.encode_sequence(question, nullptr), nullptr),
                           targets);
  };

  objective().backward();
  const auto all = params.tensors();
  std::vector<std::string> names;
  for (const auto& [name, t] : all) {
    if (!name.starts_with("mlm_head.")) names.push_back(name);
  }

  GradcheckCase result;
  result.kernel = "encoder+matcher bce";
  result.shape = "d=8 L=1";
  NoGradGuard no_grad;
  for (int s = 0; s < samples; ++s) {
    Tensor t = all.at(names[rng.uniform_index(names.size())]);
    const std::size_t j = rng.uniform_index(t.numel());
    const double analytic = t.has_grad() ? t.grad()[j] : 0.0;
    auto data = t.data();
    const Real saved = data[j];
    data[j] = saved + kStep;
    const double plus = objective().item();
    data[j] = saved - kStep;
    const double minus = objective().item();
    data[j] = saved;
    result.max_relative_error =
        std::max(result.max_relative_error, relative_error(analytic, (plus - minus) / (2 * kStep)));
    ++result.checked;
  }
  return result;
}

}  // namespace kdvqa::testing
