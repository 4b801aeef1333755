#include "owleye/encoder.hpp"

#include <cmath>

#include "owleye/error.hpp"

namespace owleye {

namespace {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out.data()[i] < 0.0) out.data()[i] = 0.0;
  return out;
}

Matrix run_layers(Matrix h0, const NormalizedAdjacency& adj,
                  const std::vector<Matrix>& weights, std::size_t emb_dim,
                  EncoderTrace* trace) {
  const std::size_t n = h0.rows();
  const std::size_t layers = weights.size();
  if (trace) {
    trace->pre.clear();
    trace->post.clear();
    trace->pre.reserve(layers);
    trace->post.reserve(layers);
  }

  std::vector<Matrix> acts;
  acts.reserve(layers);
  Matrix current = std::move(h0);
  for (std::size_t t = 0; t < layers; ++t) {
    Matrix pre = matmul(matmul(adj.values, current), weights[t]);
    current = relu(pre);
    acts.push_back(current);
    if (trace) trace->pre.push_back(std::move(pre));
  }

  Matrix out(n, emb_dim);
  const std::size_t d = weights.front().cols();
  for (std::size_t t = 1; t < layers; ++t) {  // blocks for layers 2..L
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < d; ++c)
        out(r, (t - 1) * d + c) = acts[t](r, c) - acts[0](r, c);
  }
  if (trace) trace->post = std::move(acts);
  return out;
}

}  // namespace

void EncoderParams::validate() const {
  if (layers < 2) throw InvalidArgument("EncoderParams: need at least 2 layers");
  if (width == 0) throw InvalidArgument("EncoderParams: zero width");
  if (w_attr.size() != layers || w_struc.size() != layers)
    throw InvalidArgument("EncoderParams: layer weight count mismatch");
  const std::size_t dd = emb_dim();
  auto check = [&](const Matrix& m, std::size_t r, std::size_t c, const char* what) {
    if (m.rows() != r || m.cols() != c)
      throw InvalidArgument(std::string("EncoderParams: bad shape for ") + what);
  };
  for (const Matrix& m : w_attr) check(m, width, width, "w_attr");
  for (const Matrix& m : w_struc) check(m, width, width, "w_struc");
  check(w1, dd, dd, "w1");
  if (w1_attr) check(*w1_attr, dd, dd, "w1_attr");
  check(wq_attr, dd, dd, "wq_attr");
  check(wk_attr, dd, dd, "wk_attr");
  if (wq_struc.has_value() != wk_struc.has_value())
    throw InvalidArgument("EncoderParams: wq_struc/wk_struc must come together");
  if (wq_struc) {
    check(*wq_struc, dd, dd, "wq_struc");
    check(*wk_struc, dd, dd, "wk_struc");
  }
}

std::vector<std::pair<std::string, Matrix*>> EncoderParams::named_matrices() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (std::size_t t = 0; t < w_attr.size(); ++t)
    out.emplace_back("w_attr." + std::to_string(t + 1), &w_attr[t]);
  for (std::size_t t = 0; t < w_struc.size(); ++t)
    out.emplace_back("w_struc." + std::to_string(t + 1), &w_struc[t]);
  out.emplace_back("w1", &w1);
  if (w1_attr) out.emplace_back("w1_attr", &*w1_attr);
  out.emplace_back("wq_attr", &wq_attr);
  out.emplace_back("wk_attr", &wk_attr);
  if (wq_struc) out.emplace_back("wq_struc", &*wq_struc);
  if (wk_struc) out.emplace_back("wk_struc", &*wk_struc);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> EncoderParams::named_matrices() const {
  std::vector<std::pair<std::string, const Matrix*>> out;
  for (auto& [name, m] : const_cast<EncoderParams*>(this)->named_matrices())
    out.emplace_back(name, m);
  return out;
}

EncoderParams init_params(std::size_t layers, std::size_t width, Rng& rng,
                          bool per_channel_similarity, bool share_qk) {
  if (layers < 2)
    throw InvalidArgument("init_params: residual blocks need at least 2 layers");
  if (width == 0) throw InvalidArgument("init_params: width must be positive");

  EncoderParams p;
  p.layers = layers;
  p.width = width;
  const std::size_t dd = p.emb_dim();
  for (std::size_t t = 0; t < layers; ++t) p.w_attr.push_back(glorot_uniform(width, width, rng));
  for (std::size_t t = 0; t < layers; ++t) p.w_struc.push_back(glorot_uniform(width, width, rng));
  p.w1 = glorot_uniform(dd, dd, rng);
  if (per_channel_similarity) p.w1_attr = glorot_uniform(dd, dd, rng);
  p.wq_attr = glorot_uniform(dd, dd, rng);
  p.wk_attr = glorot_uniform(dd, dd, rng);
  if (!share_qk) {
    p.wq_struc = glorot_uniform(dd, dd, rng);
    p.wk_struc = glorot_uniform(dd, dd, rng);
  }
  p.validate();
  return p;
}

Matrix encode_attribute(const Matrix& x, const NormalizedAdjacency& adj,
                        const EncoderParams& params, EncoderTrace* trace) {
  params.validate();
  if (x.cols() != params.width)
    throw InvalidArgument("encode_attribute: feature dimension " +
                          std::to_string(x.cols()) + " != layer width " +
                          std::to_string(params.width));
  if (x.rows() != adj.n)
    throw InvalidArgument("encode_attribute: feature rows != adjacency size");
  return run_layers(x, adj, params.w_attr, params.emb_dim(), trace);
}

Matrix encode_structure(std::size_t n, const NormalizedAdjacency& adj,
                        const EncoderParams& params, EncoderTrace* trace) {
  params.validate();
  if (n != adj.n) throw InvalidArgument("encode_structure: node count != adjacency size");
  return run_layers(Matrix::ones(n, params.width), adj, params.w_struc,
                    params.emb_dim(), trace);
}

Embeddings encode_graph(const Matrix& x, const NormalizedAdjacency& adj,
                        const EncoderParams& params, EncoderTrace* attr_trace,
                        EncoderTrace* struc_trace) {
  Embeddings emb;
  emb.h = encode_attribute(x, adj, params, attr_trace);
  emb.r = encode_structure(x.rows(), adj, params, struc_trace);
  return emb;
}

}  // namespace owleye
