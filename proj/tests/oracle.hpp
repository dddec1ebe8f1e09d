#pragma once

// Dense scalar-loop forward passes used as independent references. They read
// parameter values directly and never touch the tape.

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "inferem/encoder.hpp"
#include "inferem/fusion.hpp"
#include "inferem/layers.hpp"

namespace oracle {

using testing::Mat;

inline Mat linear(const Mat& x, const inferem::Linear& l) {
  return testing::add_bias(testing::mat_mul(x, testing::to_mat(l.weight->value)), l.bias->value);
}

inline Mat layer_norm(const Mat& x, const inferem::LayerNorm& n) {
  return testing::layer_norm_rows(x, n.gain->value, n.bias->value, n.eps);
}

inline Mat relu(Mat x) {
  for (auto& r : x)
    for (double& v : r) v = v > 0 ? v : 0.0;
  return x;
}

inline Mat add(Mat a, const Mat& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) a[i][j] += b[i][j];
  return a;
}

inline Mat feed_forward(const Mat& x, const inferem::FeedForward& ff) {
  return linear(relu(linear(x, ff.inner)), ff.outer);
}

/// Multi-head attention; `causal` hides keys after the query position.
inline Mat attention(const Mat& qx, const Mat& kvx, const inferem::MultiHeadAttention& mha,
                     bool causal = false, std::vector<Mat>* weights = nullptr) {
  const Mat q = linear(qx, mha.query), k = linear(kvx, mha.key), v = linear(kvx, mha.value);
  const std::size_t dk = mha.dim / mha.heads;
  Mat joined(q.size(), std::vector<double>(mha.dim, 0.0));
  for (std::size_t h = 0; h < mha.heads; ++h) {
    Mat w(q.size(), std::vector<double>(k.size(), 0.0));
    for (std::size_t i = 0; i < q.size(); ++i) {
      std::vector<double> scores(k.size());
      for (std::size_t j = 0; j < k.size(); ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < dk; ++c) s += q[i][h * dk + c] * k[j][h * dk + c];
        scores[j] = (causal && j > i) ? -std::numeric_limits<double>::infinity()
                                      : s / std::sqrt(static_cast<double>(dk));
      }
      w[i] = testing::softmax_vec(scores);
      for (std::size_t j = 0; j < k.size(); ++j)
        for (std::size_t c = 0; c < dk; ++c) joined[i][h * dk + c] += w[i][j] * v[j][h * dk + c];
    }
    if (weights) weights->push_back(w);
  }
  return linear(joined, mha.output);
}

inline Mat encoder_layer(const Mat& x, const inferem::EncoderLayer& layer) {
  const Mat n = layer_norm(x, layer.attn_norm);
  const Mat h = add(x, attention(n, n, layer.self_attn));
  return add(h, feed_forward(layer_norm(h, layer.ff_norm), layer.ff));
}

/// Per-position softmax over {self} ∪ concepts with relatedness-weighted
/// scaled dot-product scores; concepts use raw word-table rows.
inline Mat graph_attention(const Mat& base, const std::vector<inferem::PositionConcepts>& concepts,
                           const inferem::Tensor& word_table) {
  Mat out = base;
  const double d = static_cast<double>(base[0].size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (i >= concepts.size() || concepts[i].ids.empty()) continue;
    std::vector<std::vector<double>> nbrs{base[i]};
    std::vector<double> rel{1.0};
    for (std::size_t c = 0; c < concepts[i].ids.size(); ++c) {
      const auto row = word_table.row_span(static_cast<std::size_t>(concepts[i].ids[c]));
      nbrs.emplace_back(row.begin(), row.end());
      rel.push_back(concepts[i].scores[c]);
    }
    std::vector<double> scores(nbrs.size());
    for (std::size_t n = 0; n < nbrs.size(); ++n) {
      double s = 0.0;
      for (std::size_t c = 0; c < base[i].size(); ++c) s += base[i][c] * nbrs[n][c];
      scores[n] = rel[n] * s / std::sqrt(d);
    }
    const auto w = testing::softmax_vec(scores);
    for (std::size_t c = 0; c < base[i].size(); ++c) {
      double acc = 0.0;
      for (std::size_t n = 0; n < nbrs.size(); ++n) acc += w[n] * nbrs[n][c];
      out[i][c] = acc;
    }
  }
  return out;
}

inline Mat maifnet(const Mat& sq, const Mat& skv, const inferem::MaifNet& net) {
  const Mat s1 = layer_norm(add(sq, attention(sq, skv, net.attention)), net.attn_norm);
  return layer_norm(add(s1, feed_forward(s1, net.ff)), net.ff_norm);
}

}  // namespace oracle
