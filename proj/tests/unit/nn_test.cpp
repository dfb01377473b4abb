// Copyright 2026 The comae-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "comae/error.hpp"
#include "comae/nn/decoder.hpp"
#include "comae/nn/gradient_check.hpp"
#include "comae/nn/ops.hpp"
#include "comae/nn/rng.hpp"

namespace comae::nn {
namespace {

using Matrix = std::vector<std::vector<double>>;

// Softmax evaluated in extended precision without max subtraction; inputs
// in these tests are small, so no overflow can occur.
std::vector<double> reference_softmax(const std::vector<double>& v) {
  long double total = 0.0L;
  for (double x : v) total += std::exp(static_cast<long double>(x));
  std::vector<double> out;
  for (double x : v) {
    out.push_back(static_cast<double>(std::exp(static_cast<long double>(x)) /
                                      total));
  }
  return out;
}

TEST(SoftmaxTest, UniformForEqualLogits) {
  auto p = softmax(std::vector<double>{0.0, 0.0, 0.0});
  for (double v : p) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxTest, MatchesExtendedPrecisionOracle) {
  const std::vector<double> logits{1.0, 2.0, 3.0};
  auto expected = reference_softmax(logits);
  auto p = softmax(logits);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(p[i], expected[i], 1e-15);
  // Frozen from the oracle above.
  EXPECT_NEAR(p[0], 0.09003, 1e-5);
  EXPECT_NEAR(p[1], 0.24473, 1e-5);
  EXPECT_NEAR(p[2], 0.66524, 1e-5);
}

TEST(SoftmaxTest, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(softmax(std::vector<double>{}), DataError);
  EXPECT_THROW(softmax(std::vector<double>{1.0, NAN}), DataError);
  EXPECT_THROW(softmax(std::vector<double>{INFINITY, 0.0}), DataError);
}

TEST(SoftmaxTest, RandomVectorsNormalisedAndShiftInvariant) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(40);
    std::vector<double> v(n), shifted(n);
    const double c = rng.normal(0.0, 50.0);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = rng.normal(0.0, 5.0);
      shifted[i] = v[i] + c;
    }
    auto p = softmax(v);
    auto q = softmax(shifted);
    double total = std::accumulate(p.begin(), p.end(), 0.0);
    EXPECT_NEAR(total, 1.0, 1e-9);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_GE(p[i], 0.0);
      EXPECT_NEAR(p[i], q[i], 1e-12);
    }
  }
}

TEST(CrossEntropyTest, ClosedForms) {
  std::vector<double> uniform(10, 0.3);
  for (std::size_t t = 0; t < 10; ++t) {
    EXPECT_NEAR(cross_entropy_from_logits(uniform, t), std::log(10.0), 1e-12);
  }
  std::vector<double> peaked{0.0, 1e6, 0.0};
  EXPECT_LT(cross_entropy_from_logits(peaked, 1), 1e-6);

  const std::vector<double> logits{1.0, 2.0, 3.0};
  const double expected = -std::log(reference_softmax(logits)[0]);
  EXPECT_NEAR(cross_entropy_from_logits(logits, 0), expected, 1e-12);
  EXPECT_NEAR(cross_entropy_from_logits(logits, 0), 2.40761, 1e-4);
}

TEST(CrossEntropyTest, TargetOutOfRange) {
  EXPECT_THROW(cross_entropy_from_logits(std::vector<double>{1.0, 2.0}, 2),
               DataError);
}

TEST(CrossEntropyTest, BoundedByArgmaxLoss) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(12);
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal(0.0, 3.0);
    const std::size_t best = argmax(v);
    const double floor = -std::log(softmax(v)[best]);
    for (std::size_t t = 0; t < n; ++t) {
      const double ce = cross_entropy_from_logits(v, t);
      if (t == best) {
        EXPECT_NEAR(ce, floor, 1e-12);
      } else {
        EXPECT_GT(ce, floor);
      }
    }
  }
}

TEST(GradientCheckTest, SquaredNorm) {
  Parameter w{"w", Tensor::row_vector({1.0, 2.0})};
  auto loss = [&](GradientTape& t) {
    Var x = parameter(t, w);
    return sum(mul(x, x));
  };
  GradientTape tape;
  Var out = loss(tape);
  tape.backward(out);
  const Tensor* g = tape.find_param_grad(w);
  ASSERT_NE(g, nullptr);
  EXPECT_DOUBLE_EQ((*g)(0, 0), 2.0);
  EXPECT_DOUBLE_EQ((*g)(0, 1), 4.0);

  Parameter* params[] = {&w};
  EXPECT_LT(gradient_check(loss, params, 1e-5).max_relative_error, 1e-8);
}

TEST(GradientCheckTest, RejectsNonPositiveEpsilon) {
  Parameter w{"w", Tensor::row_vector({1.0})};
  Parameter* params[] = {&w};
  auto loss = [&](GradientTape& t) { return sum(parameter(t, w)); };
  EXPECT_THROW(gradient_check(loss, params, 0.0), UsageError);
}

// Every differentiable operation on its own, at f64 with eps = 1e-5.
TEST(GradientCheckTest, EachOperation) {
  Rng rng(3);
  Parameter a = make_parameter("a", 3, 4, rng, 0.7);
  Parameter b = make_parameter("b", 3, 4, rng, 0.7);
  Parameter row = make_parameter("row", 1, 4, rng, 0.7);
  Parameter w = make_parameter("w", 4, 6, rng, 0.7);
  Parameter bias = make_parameter("bias", 1, 6, rng, 0.7);
  Parameter table = make_parameter("table", 5, 4, rng, 0.7);
  Parameter gain = make_parameter("gain", 1, 4, rng, 0.7);
  Parameter shift = make_parameter("shift", 1, 4, rng, 0.7);
  Parameter* params[] = {&a, &b, &row, &w, &bias, &table, &gain, &shift};
  const std::vector<int> ids{4, 0, 4};
  const std::vector<int> targets{1, 3, 0};
  // Fixed projection that makes every output element matter.
  Parameter mix = make_parameter("mix", 6, 5, rng, 0.7);

  std::vector<std::function<Var(GradientTape&)>> losses = {
      [&](GradientTape& t) {
        return sum(mul(add(parameter(t, a), parameter(t, b)),
                       parameter(t, b)));
      },
      [&](GradientTape& t) {
        return sum(mul(add(parameter(t, a), parameter(t, row)),
                       parameter(t, a)));
      },
      [&](GradientTape& t) {
        Var h = tanh(linear(parameter(t, a), w, &bias));
        return cross_entropy(linear(h, mix, nullptr), targets);
      },
      [&](GradientTape& t) {
        Var h = gelu(scale(parameter(t, a), 1.7));
        return cross_entropy(tied_projection(h, table), targets);
      },
      [&](GradientTape& t) {
        Var h = layer_norm(parameter(t, a), gain, shift);
        return cross_entropy(tied_projection(h, table), targets);
      },
      [&](GradientTape& t) {
        Var e = embedding(t, table, ids);
        Var h = mul(e, parameter(t, b));
        return cross_entropy(tied_projection(h, table), targets);
      },
      [&](GradientTape& t) {
        Var qkv = linear(parameter(t, a), w, nullptr);
        // 6 columns = 3 * d with d = 2 and two heads of width 1.
        Var att = causal_self_attention(qkv, 2);
        Var wide = concat_cols(std::vector<Var>{att, att, parameter(t, b)});
        Var part = select_rows(wide, 1, 2);
        Var stacked = concat_rows(std::vector<Var>{part, mean_rows(wide)});
        return sum(mul(stacked, stacked));
      },
  };
  for (std::size_t i = 0; i < losses.size(); ++i) {
    auto r = gradient_check(losses[i], params, 1e-5);
    EXPECT_LT(r.max_relative_error, 1e-4)
        << "loss " << i << " worst at " << r.worst_parameter << "["
        << r.worst_index << "]";
  }
}

// --- Decoder block ---------------------------------------------------------

Matrix to_matrix(const Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  }
  return m;
}

Matrix ref_layer_norm(const Matrix& x, const Tensor& g, const Tensor& b) {
  Matrix out = x;
  for (std::size_t r = 0; r < x.size(); ++r) {
    const double n = static_cast<double>(x[r].size());
    double mean = 0.0;
    for (double v : x[r]) mean += v / n;
    double var = 0.0;
    for (double v : x[r]) var += (v - mean) * (v - mean) / n;
    for (std::size_t c = 0; c < x[r].size(); ++c) {
      out[r][c] = (x[r][c] - mean) / std::sqrt(var + 1e-5) * g(0, c) + b(0, c);
    }
  }
  return out;
}

Matrix ref_affine(const Matrix& x, const Tensor& w, const Tensor& b) {
  Matrix out(x.size(), std::vector<double>(w.cols()));
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double acc = b(0, j);
      for (std::size_t k = 0; k < w.rows(); ++k) acc += x[r][k] * w(k, j);
      out[r][j] = acc;
    }
  }
  return out;
}

// Straight transcription of a pre-norm causal decoder block.
Matrix reference_block(const Matrix& x, const DecoderBlock& p,
                       std::size_t heads) {
  const std::size_t steps = x.size();
  const std::size_t d = x[0].size();
  const std::size_t hd = d / heads;
  Matrix qkv = ref_affine(ref_layer_norm(x, p.ln1_gain.value, p.ln1_bias.value),
                          p.qkv_weight.value, Tensor(1, 3 * d));
  Matrix att(steps, std::vector<double>(d, 0.0));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> scores;
      for (std::size_t u = 0; u <= t; ++u) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) {
          s += qkv[t][h * hd + c] * qkv[u][d + h * hd + c];
        }
        scores.push_back(s / std::sqrt(static_cast<double>(hd)));
      }
      auto weights = reference_softmax(scores);
      for (std::size_t u = 0; u <= t; ++u) {
        for (std::size_t c = 0; c < hd; ++c) {
          att[t][h * hd + c] += weights[u] * qkv[u][2 * d + h * hd + c];
        }
      }
    }
  }
  Matrix projected = ref_affine(att, p.out_weight.value, p.out_bias.value);
  Matrix h = x;
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t c = 0; c < d; ++c) h[t][c] += projected[t][c];
  }
  Matrix m = ref_affine(ref_layer_norm(h, p.ln2_gain.value, p.ln2_bias.value),
                        p.fc_weight.value, p.fc_bias.value);
  for (auto& r : m) {
    for (double& v : r) {
      v = 0.5 * v *
          (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
    }
  }
  m = ref_affine(m, p.proj_weight.value, p.proj_bias.value);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t c = 0; c < d; ++c) h[t][c] += m[t][c];
  }
  return h;
}

Tensor random_input(Rng& rng, std::size_t steps, std::size_t d) {
  Tensor x(steps, d);
  for (double& v : x.values()) v = rng.normal(0.0, 1.0);
  return x;
}

TEST(DecoderBlockTest, IdentityLikeTwoDimMatchesHandEvaluation) {
  DecoderConfig config{2, 1, 1, 16};
  Rng rng(0);
  Decoder dec = make_decoder(config, "", rng, 0.0);
  DecoderBlock& b = dec.blocks[0];
  // q = k = v = normalised input, output projection = identity,
  // MLP: fc = [I, 0], proj picks the first two hidden units.
  for (std::size_t i = 0; i < 2; ++i) {
    b.qkv_weight.value(i, i) = 1.0;
    b.qkv_weight.value(i, 2 + i) = 1.0;
    b.qkv_weight.value(i, 4 + i) = 1.0;
    b.out_weight.value(i, i) = 1.0;
    b.fc_weight.value(i, i) = 1.0;
    b.proj_weight.value(i, i) = 1.0;
  }
  const Tensor x = Tensor::from_values(3, 2, {1.0, 0.0, 0.0, 2.0, 3.0, 1.0});
  GradientTape tape(false);
  Var out = decoder_block(tape.constant(x), b, config);

  // Hand evaluation. In two dimensions layer norm maps a row with a != b to
  // (+-s, -+s) with s = |a-b|/2 / sqrt((a-b)^2/4 + eps).
  auto ln = [](double a, double c) {
    const double half = (a - c) / 2.0;
    const double s = half / std::sqrt(half * half + 1e-5);
    return std::pair{s, -s};
  };
  const auto n0 = ln(1.0, 0.0), n1 = ln(0.0, 2.0), n2 = ln(3.0, 1.0);
  const double scale = 1.0 / std::sqrt(2.0);
  auto dot = [](std::pair<double, double> p, std::pair<double, double> q) {
    return p.first * q.first + p.second * q.second;
  };
  // Row 1 attends over rows 0 and 1.
  const double s10 = dot(n1, n0) * scale, s11 = dot(n1, n1) * scale;
  const double w10 = std::exp(s10) / (std::exp(s10) + std::exp(s11));
  const double a1x = w10 * n0.first + (1 - w10) * n1.first;
  const double a1y = w10 * n0.second + (1 - w10) * n1.second;
  const double h1x = 0.0 + a1x, h1y = 2.0 + a1y;
  const auto m1 = ln(h1x, h1y);
  auto g = [](double v) {
    return 0.5 * v *
           (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (v + 0.044715 * v * v * v)));
  };
  EXPECT_NEAR(out.value()(1, 0), h1x + g(m1.first), 1e-12);
  EXPECT_NEAR(out.value()(1, 1), h1y + g(m1.second), 1e-12);
  // Row 0 attends only to itself.
  const double h0x = 1.0 + n0.first, h0y = 0.0 + n0.second;
  const auto m0 = ln(h0x, h0y);
  EXPECT_NEAR(out.value()(0, 0), h0x + g(m0.first), 1e-12);
  EXPECT_NEAR(out.value()(0, 1), h0y + g(m0.second), 1e-12);
  (void)n2;

  const Matrix expected = reference_block(to_matrix(x), b, 1);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t c = 0; c < 2; ++c) {
      EXPECT_NEAR(out.value()(t, c), expected[t][c], 1e-12);
    }
  }
}

TEST(DecoderBlockTest, RandomWeightsMatchReference) {
  DecoderConfig config{8, 1, 2, 32};
  Rng rng(21);
  Decoder dec = make_decoder(config, "", rng, 0.3);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = random_input(rng, 1 + rng.uniform_index(9), 8);
    GradientTape tape(false);
    Var out = decoder_block(tape.constant(x), dec.blocks[0], config);
    const Matrix expected = reference_block(to_matrix(x), dec.blocks[0], 2);
    for (std::size_t t = 0; t < x.rows(); ++t) {
      for (std::size_t c = 0; c < 8; ++c) {
        EXPECT_NEAR(out.value()(t, c), expected[t][c], 1e-12);
      }
    }
  }
}

TEST(DecoderBlockTest, SingleTokenDependsOnlyOnItself) {
  DecoderConfig config{4, 2, 2, 8};
  Rng rng(5);
  Decoder dec = make_decoder(config, "", rng, 0.5);
  const Tensor x = random_input(rng, 1, 4);
  GradientTape t1(false), t2(false);
  Var alone = run_decoder(t1.constant(x), dec, config);
  Tensor longer(3, 4);
  std::copy_n(x.data(), 4, longer.data());
  for (std::size_t i = 4; i < 12; ++i) longer.data()[i] = rng.normal(0, 1);
  Var with_suffix = run_decoder(t2.constant(longer), dec, config);
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(alone.value()(0, c), with_suffix.value()(0, c));
  }
}

TEST(DecoderBlockTest, CausalityUnderSuffixPerturbation) {
  DecoderConfig config{8, 2, 2, 64};
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Decoder dec = make_decoder(config, "", rng, 0.4);
    const std::size_t steps = 2 + rng.uniform_index(10);
    Tensor x = random_input(rng, steps, 8);
    const std::size_t cut = rng.uniform_index(steps - 1);
    Tensor y = x;
    for (std::size_t r = cut + 1; r < steps; ++r) {
      for (std::size_t c = 0; c < 8; ++c) y(r, c) += rng.normal(0.0, 2.0);
    }
    GradientTape t1(false), t2(false);
    Var ox = run_decoder(t1.constant(x), dec, config);
    Var oy = run_decoder(t2.constant(y), dec, config);
    for (std::size_t r = 0; r <= cut; ++r) {
      for (std::size_t c = 0; c < 8; ++c) {
        ASSERT_EQ(ox.value()(r, c), oy.value()(r, c));
      }
    }
  }
}

TEST(DecoderBlockTest, RejectsOverlongSequence) {
  DecoderConfig config{4, 1, 1, 4};
  Rng rng(1);
  Decoder dec = make_decoder(config, "", rng, 0.02);
  GradientTape tape(false);
  EXPECT_THROW(run_decoder(tape.constant(Tensor(5, 4)), dec, config),
               UsageError);
}

TEST(DecoderBlockTest, TwoLayerGradientCheck) {
  DecoderConfig config{8, 2, 2, 16};
  Rng rng(2024);
  Decoder dec = make_decoder(config, "", rng, 0.3);
  Parameter words = make_parameter("words", 6, 8, rng, 0.3);
  const std::vector<int> ids{1, 4, 2, 5};
  const std::vector<int> targets{4, 2, 5, 0};
  auto loss = [&](GradientTape& t) {
    Var h = run_decoder(embedding(t, words, ids), dec, config);
    return cross_entropy(tied_projection(h, words), targets);
  };
  std::vector<Parameter*> params{&words};
  append_parameters(dec, params);
  auto r = gradient_check(loss, params, 1e-5);
  EXPECT_LT(r.max_relative_error, 1e-4)
      << r.worst_parameter << "[" << r.worst_index << "]";
}

TEST(TensorTest, RejectsBadShapesAndNonFinite) {
  EXPECT_THROW(Tensor::from_values(2, 2, {1.0, 2.0, 3.0}), DataError);
  EXPECT_THROW(Tensor::from_values(1, 2, {1.0, NAN}), DataError);
  EXPECT_NO_THROW(Tensor::from_values(1, 2, {1.0, 2.0}));
}

TEST(RngTest, DeterministicAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  const std::vector<double> w{0.0, 1.0, 0.0};
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.categorical(w), 1u);
}

}  // namespace
}  // namespace comae::nn
