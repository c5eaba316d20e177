#include "dhsa/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "dhsa/labeling.hpp"
#include "dhsa/tensor_io.hpp"

namespace dhsa {

PredictorParams::PredictorParams(PredictorShape shape) : shape_(shape) {
    const std::size_t d = shape_.dim;
    if (d == 0 || shape_.heads == 0 || d % shape_.heads != 0) {
        throw std::invalid_argument("predictor heads must divide the key dimension");
    }
    if (shape_.window == 0 || shape_.hidden == 0) throw std::invalid_argument("predictor window/hidden must be >= 1");
    std::size_t offset = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
        blocks_.push_back({std::move(name), offset, rows, cols});
        offset += rows * cols;
    };
    add("wq", d, d);
    add("bq", d, 1);
    add("wk", d, d);
    add("bk", d, 1);
    add("wv", d, d);
    add("bv", d, 1);
    add("wo", d, d);
    add("bo", d, 1);
    if (shape_.position_bias) add("pos", shape_.window, d);
    add("w1", shape_.hidden, shape_.feature_dim());
    add("b1", shape_.hidden, 1);
    add("w2", 1, shape_.hidden);
    add("b2", 1, 1);
    values_.assign(offset, 0.0);
}

PredictorParams PredictorParams::xavier(PredictorShape shape, std::uint64_t seed) {
    PredictorParams p(shape);
    std::mt19937_64 rng(seed);
    for (const auto& b : p.blocks_) {
        if (b.name.front() != 'w') continue;  // biases and position terms start at zero
        const double limit = std::sqrt(6.0 / static_cast<double>(b.rows + b.cols));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (std::size_t n = 0; n < b.size(); ++n) p.values_[b.offset + n] = dist(rng);
    }
    return p;
}

const ParamBlock& PredictorParams::block(const std::string& name) const {
    for (const auto& b : blocks_) {
        if (b.name == name) return b;
    }
    throw std::out_of_range("no parameter block named " + name);
}

std::span<double> PredictorParams::view(const std::string& name) {
    const auto& b = block(name);
    return {values_.data() + b.offset, b.size()};
}

std::span<const double> PredictorParams::view(const std::string& name) const {
    const auto& b = block(name);
    return {values_.data() + b.offset, b.size()};
}

namespace {
constexpr char kCheckpointMagic[] = "DHSAPRD1";
}

void save_checkpoint(const std::string& path, const PredictorParams& params) {
    const auto& s = params.shape();
    nlohmann::json header = {{"dim", s.dim},         {"heads", s.heads},
                             {"window", s.window},   {"hidden", s.hidden},
                             {"position_bias", s.position_bias}, {"count", params.values().size()}};
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : params.blocks()) blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
    header["blocks"] = blocks;

    std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
    const std::string text = header.dump();
    put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    for (double x : params.values()) put_f32(out, static_cast<float>(x));
    write_file_bytes(path, out);
}

PredictorParams load_checkpoint(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 12 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
        throw std::runtime_error(path + ": not a DHSAPRD1 checkpoint");
    }
    const std::uint32_t header_size = get_u32(bytes, 8);
    if (12 + header_size > bytes.size()) throw std::runtime_error(path + ": truncated checkpoint header");
    const auto header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_size);
    PredictorShape shape;
    shape.dim = header.at("dim").get<std::size_t>();
    shape.heads = header.at("heads").get<std::size_t>();
    shape.window = header.at("window").get<std::size_t>();
    shape.hidden = header.at("hidden").get<std::size_t>();
    shape.position_bias = header.at("position_bias").get<bool>();
    PredictorParams params(shape);

    const auto& blocks = header.at("blocks");
    if (blocks.size() != params.blocks().size()) throw std::runtime_error(path + ": block list mismatch");
    for (std::size_t n = 0; n < blocks.size(); ++n) {
        const auto& b = params.blocks()[n];
        if (blocks[n].at("name").get<std::string>() != b.name || blocks[n].at("rows").get<std::size_t>() != b.rows ||
            blocks[n].at("cols").get<std::size_t>() != b.cols) {
            throw std::runtime_error(path + ": unexpected block " + blocks[n].dump());
        }
    }
    const std::size_t count = params.values().size();
    if (header.at("count").get<std::size_t>() != count || bytes.size() != 12 + header_size + 4 * count) {
        throw std::runtime_error(path + ": weight payload size mismatch");
    }
    for (std::size_t n = 0; n < count; ++n) params.values()[n] = get_f32(bytes, 12 + header_size + 4 * n);
    return params;
}

namespace {

// Offsets of each block in the flat vector; gradients share the layout.
struct Layout {
    std::size_t d, heads, dh, w, hidden, features;
    bool pos;
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ps, w1, b1, w2, b2;

    explicit Layout(const PredictorParams& p)
        : d(p.shape().dim),
          heads(p.shape().heads),
          dh(d / heads),
          w(p.shape().window),
          hidden(p.shape().hidden),
          features(p.shape().feature_dim()),
          pos(p.shape().position_bias),
          wq(p.block("wq").offset),
          bq(p.block("bq").offset),
          wk(p.block("wk").offset),
          bk(p.block("bk").offset),
          wv(p.block("wv").offset),
          bv(p.block("bv").offset),
          wo(p.block("wo").offset),
          bo(p.block("bo").offset),
          ps(pos ? p.block("pos").offset : 0),
          w1(p.block("w1").offset),
          b1(p.block("b1").offset),
          w2(p.block("w2").offset),
          b2(p.block("b2").offset) {}
};

// y = W x + b, W is rows x cols row-major.
void affine(const double* W, const double* b, const double* x, std::size_t rows, std::size_t cols, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        double s = b ? b[r] : 0.0;
        const double* wr = W + r * cols;
        for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
        y[r] = s;
    }
}

// x += W^T g
void affine_transpose_acc(const double* W, const double* g, std::size_t rows, std::size_t cols, double* x) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = W + r * cols;
        const double gr = g[r];
        if (gr == 0.0) continue;
        for (std::size_t c = 0; c < cols; ++c) x[c] += wr[c] * gr;
    }
}

// dW += g x^T
void outer_acc(const double* g, const double* x, std::size_t rows, std::size_t cols, double* dW) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* dr = dW + r * cols;
        for (std::size_t c = 0; c < cols; ++c) dr[c] += gr * x[c];
    }
}

// Token-level projections shared by every window of a sequence.
struct Projections {
    std::size_t length = 0;
    std::vector<double> q, k, v;     // L x d
    std::vector<double> tq, tk, tv;  // w x d position terms (empty without position bias)
};

Projections project(const Layout& ly, const double* theta, const Matrix& keys, std::size_t first, std::size_t count) {
    Projections p;
    p.length = count;
    p.q.resize(count * ly.d);
    p.k.resize(count * ly.d);
    p.v.resize(count * ly.d);
    for (std::size_t j = 0; j < count; ++j) {
        const double* x = keys.row(first + j).data();
        affine(theta + ly.wq, theta + ly.bq, x, ly.d, ly.d, &p.q[j * ly.d]);
        affine(theta + ly.wk, theta + ly.bk, x, ly.d, ly.d, &p.k[j * ly.d]);
        affine(theta + ly.wv, theta + ly.bv, x, ly.d, ly.d, &p.v[j * ly.d]);
    }
    if (ly.pos) {
        p.tq.resize(ly.w * ly.d);
        p.tk.resize(ly.w * ly.d);
        p.tv.resize(ly.w * ly.d);
        for (std::size_t t = 0; t < ly.w; ++t) {
            const double* x = theta + ly.ps + t * ly.d;
            affine(theta + ly.wq, nullptr, x, ly.d, ly.d, &p.tq[t * ly.d]);
            affine(theta + ly.wk, nullptr, x, ly.d, ly.d, &p.tk[t * ly.d]);
            affine(theta + ly.wv, nullptr, x, ly.d, ly.d, &p.tv[t * ly.d]);
        }
    }
    return p;
}

struct WindowState {
    std::vector<double> q, k, v;  // w x d
    std::vector<double> alpha;    // heads x w x w
    std::vector<double> pooled;   // mean of per-position head outputs, d
    std::vector<double> enc;      // d
};

void window_forward(const Layout& ly, const double* theta, const Projections& proj, std::size_t start,
                    WindowState& ws) {
    const std::size_t d = ly.d, w = ly.w;
    ws.q.assign(proj.q.begin() + start * d, proj.q.begin() + (start + w) * d);
    ws.k.assign(proj.k.begin() + start * d, proj.k.begin() + (start + w) * d);
    ws.v.assign(proj.v.begin() + start * d, proj.v.begin() + (start + w) * d);
    if (ly.pos) {
        for (std::size_t n = 0; n < w * d; ++n) {
            ws.q[n] += proj.tq[n];
            ws.k[n] += proj.tk[n];
            ws.v[n] += proj.tv[n];
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(ly.dh));
    ws.alpha.assign(ly.heads * w * w, 0.0);
    ws.pooled.assign(d, 0.0);
    std::vector<double> row(w);
    for (std::size_t h = 0; h < ly.heads; ++h) {
        const std::size_t c0 = h * ly.dh;
        for (std::size_t t = 0; t < w; ++t) {
            double peak = -std::numeric_limits<double>::infinity();
            for (std::size_t u = 0; u < w; ++u) {
                double s = 0.0;
                for (std::size_t c = c0; c < c0 + ly.dh; ++c) s += ws.q[t * d + c] * ws.k[u * d + c];
                row[u] = s * scale;
                peak = std::max(peak, row[u]);
            }
            double total = 0.0;
            for (auto& x : row) {
                x = std::exp(x - peak);
                total += x;
            }
            double* a = &ws.alpha[(h * w + t) * w];
            for (std::size_t u = 0; u < w; ++u) {
                a[u] = row[u] / total;
                for (std::size_t c = c0; c < c0 + ly.dh; ++c) ws.pooled[c] += a[u] * ws.v[u * d + c];
            }
        }
    }
    for (auto& x : ws.pooled) x /= static_cast<double>(w);
    ws.enc.resize(d);
    affine(theta + ly.wo, theta + ly.bo, ws.pooled.data(), d, d, ws.enc.data());
}

// Gradients with respect to the window's per-position q/k/v (w x d each),
// given d loss / d enc. Output-projection gradients go straight to `grad`.
void window_backward(const Layout& ly, const double* theta, const WindowState& ws, const double* denc,
                     double* grad, std::vector<double>& dq, std::vector<double>& dk, std::vector<double>& dv) {
    const std::size_t d = ly.d, w = ly.w;
    outer_acc(denc, ws.pooled.data(), d, d, grad + ly.wo);
    for (std::size_t r = 0; r < d; ++r) grad[ly.bo + r] += denc[r];
    std::vector<double> dpooled(d, 0.0);
    affine_transpose_acc(theta + ly.wo, denc, d, d, dpooled.data());
    for (auto& x : dpooled) x /= static_cast<double>(w);  // every position receives the same d output

    dq.assign(w * d, 0.0);
    dk.assign(w * d, 0.0);
    dv.assign(w * d, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(ly.dh));
    std::vector<double> dalpha(w);
    for (std::size_t h = 0; h < ly.heads; ++h) {
        const std::size_t c0 = h * ly.dh;
        for (std::size_t t = 0; t < w; ++t) {
            const double* a = &ws.alpha[(h * w + t) * w];
            double weighted = 0.0;
            for (std::size_t u = 0; u < w; ++u) {
                double s = 0.0;
                for (std::size_t c = c0; c < c0 + ly.dh; ++c) {
                    s += dpooled[c] * ws.v[u * d + c];
                    dv[u * d + c] += a[u] * dpooled[c];
                }
                dalpha[u] = s;
                weighted += a[u] * s;
            }
            for (std::size_t u = 0; u < w; ++u) {
                const double ds = a[u] * (dalpha[u] - weighted) * scale;
                for (std::size_t c = c0; c < c0 + ly.dh; ++c) {
                    dq[t * d + c] += ds * ws.k[u * d + c];
                    dk[u * d + c] += ds * ws.q[t * d + c];
                }
            }
        }
    }
}

struct FuseCache {
    double nl = 0.0, nr = 0.0, cos = 0.0;
};

void fuse_into(const double* l, const double* r, std::size_t d, double* h, FuseCache* cache) {
    for (std::size_t c = 0; c < d; ++c) {
        h[c] = l[c];
        h[d + c] = r[c];
        h[2 * d + c] = std::abs(l[c] - r[c]);
        h[3 * d + c] = l[c] * r[c];
    }
    const double cs = cosine_similarity({l, d}, {r, d});
    h[4 * d] = cs;
    if (cache) *cache = {norm({l, d}), norm({r, d}), cs};
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double mlp_logit(const Layout& ly, const double* theta, const double* h, double* z1) {
    affine(theta + ly.w1, theta + ly.b1, h, ly.hidden, ly.features, z1);
    double logit = theta[ly.b2];
    for (std::size_t n = 0; n < ly.hidden; ++n) logit += theta[ly.w2 + n] * std::max(z1[n], 0.0);
    return logit;
}

std::vector<double> encode_window_impl(const Layout& ly, const double* theta, const Matrix& keys, std::size_t first) {
    if (keys.cols() != ly.d) throw std::invalid_argument("key dimension does not match predictor");
    if (first + ly.w > keys.rows()) throw std::invalid_argument("window runs past the end of the sequence");
    const auto proj = project(ly, theta, keys, first, ly.w);
    WindowState ws;
    window_forward(ly, theta, proj, 0, ws);
    return ws.enc;
}

// Signs of every ReLU input and every l - r coordinate; a finite difference
// that changes this pattern crossed a kink.
using KinkPattern = std::vector<std::int8_t>;

struct SequenceOutput {
    double loss_sum = 0.0;
    std::size_t count = 0;
};

// Forward (and optionally backward) over every candidate position of one
// sequence. Gradient is of the summed (not averaged) loss, times grad_scale.
SequenceOutput sequence_pass(const Layout& ly, const double* theta, const Matrix& keys,
                             const std::vector<double>* labels, const LossConfig& loss, double grad_scale,
                             double* grad, std::vector<double>* probabilities, KinkPattern* pattern) {
    const std::size_t L = keys.rows();
    const std::size_t d = ly.d, w = ly.w;
    if (keys.cols() != d) throw std::invalid_argument("key dimension does not match predictor");
    if (labels && labels->size() != L) throw std::invalid_argument("label length does not match sequence");
    if (probabilities) probabilities->assign(L, 0.0);
    const auto candidates = candidate_positions(L, w);
    SequenceOutput out;
    if (candidates.empty()) return out;

    // Window starts run from 0 to L - w - 1.
    const std::size_t num_windows = candidates.back() + 2;
    const auto proj = project(ly, theta, keys, 0, L);
    std::vector<WindowState> windows(num_windows);
    for (std::size_t s = 0; s < num_windows; ++s) window_forward(ly, theta, proj, s, windows[s]);

    std::vector<double> denc;
    if (grad) denc.assign(num_windows * d, 0.0);
    std::vector<double> h(ly.features), z1(ly.hidden), dz1(ly.hidden), dh(ly.features);
    for (std::size_t i : candidates) {
        const double* l = windows[i + 1 - w].enc.data();
        const double* r = windows[i + 1].enc.data();
        FuseCache fc;
        fuse_into(l, r, d, h.data(), &fc);
        const double logit = mlp_logit(ly, theta, h.data(), z1.data());
        const double p = sigmoid(logit);
        if (probabilities) (*probabilities)[i] = p;
        if (pattern) {
            for (double z : z1) pattern->push_back(z > 0.0 ? 1 : (z < 0.0 ? -1 : 0));
            for (std::size_t c = 0; c < d; ++c) pattern->push_back(l[c] > r[c] ? 1 : (l[c] < r[c] ? -1 : 0));
        }
        if (!labels) continue;
        const double y = (*labels)[i];
        out.loss_sum += focal_bce(p, y, loss);
        ++out.count;
        if (!grad) continue;

        const double g = focal_bce_logit_grad(logit, y, loss) * grad_scale;
        if (g == 0.0) continue;
        grad[ly.b2] += g;
        for (std::size_t n = 0; n < ly.hidden; ++n) {
            grad[ly.w2 + n] += g * std::max(z1[n], 0.0);
            dz1[n] = z1[n] > 0.0 ? g * theta[ly.w2 + n] : 0.0;
        }
        outer_acc(dz1.data(), h.data(), ly.hidden, ly.features, grad + ly.w1);
        for (std::size_t n = 0; n < ly.hidden; ++n) grad[ly.b1 + n] += dz1[n];
        std::fill(dh.begin(), dh.end(), 0.0);
        affine_transpose_acc(theta + ly.w1, dz1.data(), ly.hidden, ly.features, dh.data());

        double* dl = &denc[(i + 1 - w) * d];
        double* dr = &denc[(i + 1) * d];
        const double dcos = dh[4 * d];
        const bool cos_live = fc.nl > 0.0 && fc.nr > 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = l[c] - r[c];
            const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            double gl = dh[c] + sgn * dh[2 * d + c] + r[c] * dh[3 * d + c];
            double gr = dh[d + c] - sgn * dh[2 * d + c] + l[c] * dh[3 * d + c];
            if (cos_live) {
                gl += dcos * (r[c] / (fc.nl * fc.nr) - fc.cos * l[c] / (fc.nl * fc.nl));
                gr += dcos * (l[c] / (fc.nl * fc.nr) - fc.cos * r[c] / (fc.nr * fc.nr));
            }
            dl[c] += gl;
            dr[c] += gr;
        }
    }
    if (!grad) return out;

    // Back through the shared encoder: per-token and per-slot projection grads.
    std::vector<double> dpq(L * d, 0.0), dpk(L * d, 0.0), dpv(L * d, 0.0);
    std::vector<double> dtq(w * d, 0.0), dtk(w * d, 0.0), dtv(w * d, 0.0);
    std::vector<double> dq, dk, dv;
    for (std::size_t s = 0; s < num_windows; ++s) {
        const double* de = &denc[s * d];
        if (std::all_of(de, de + d, [](double x) { return x == 0.0; })) continue;
        window_backward(ly, theta, windows[s], de, grad, dq, dk, dv);
        for (std::size_t n = 0; n < w * d; ++n) {
            dpq[s * d + n] += dq[n];
            dpk[s * d + n] += dk[n];
            dpv[s * d + n] += dv[n];
        }
        if (ly.pos) {
            for (std::size_t n = 0; n < w * d; ++n) {
                dtq[n] += dq[n];
                dtk[n] += dk[n];
                dtv[n] += dv[n];
            }
        }
    }
    for (std::size_t j = 0; j < L; ++j) {
        const double* x = keys.row(j).data();
        outer_acc(&dpq[j * d], x, d, d, grad + ly.wq);
        outer_acc(&dpk[j * d], x, d, d, grad + ly.wk);
        outer_acc(&dpv[j * d], x, d, d, grad + ly.wv);
        for (std::size_t r = 0; r < d; ++r) {
            grad[ly.bq + r] += dpq[j * d + r];
            grad[ly.bk + r] += dpk[j * d + r];
            grad[ly.bv + r] += dpv[j * d + r];
        }
    }
    if (ly.pos) {
        for (std::size_t t = 0; t < w; ++t) {
            const double* x = theta + ly.ps + t * d;
            outer_acc(&dtq[t * d], x, d, d, grad + ly.wq);
            outer_acc(&dtk[t * d], x, d, d, grad + ly.wk);
            outer_acc(&dtv[t * d], x, d, d, grad + ly.wv);
            double* dp = grad + ly.ps + t * d;
            affine_transpose_acc(theta + ly.wq, &dtq[t * d], d, d, dp);
            affine_transpose_acc(theta + ly.wk, &dtk[t * d], d, d, dp);
            affine_transpose_acc(theta + ly.wv, &dtv[t * d], d, d, dp);
        }
    }
    return out;
}

std::size_t count_candidates(const std::vector<const TrainingExample*>& batch, std::size_t window) {
    std::size_t n = 0;
    for (const auto* ex : batch) n += candidate_positions(ex->keys.rows(), window).size();
    return n;
}

double batch_loss(const PredictorParams& params, const std::vector<const TrainingExample*>& batch,
                  const LossConfig& loss, std::vector<double>* gradient, std::vector<std::vector<double>>* predictions,
                  KinkPattern* pattern) {
    const Layout ly(params);
    const std::size_t total = count_candidates(batch, ly.w);
    if (total == 0) throw std::invalid_argument("batch has no candidate positions");
    if (gradient) gradient->assign(params.values().size(), 0.0);
    if (predictions) predictions->resize(batch.size());
    const double scale = 1.0 / static_cast<double>(total);
    double sum = 0.0;
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto out = sequence_pass(ly, params.values().data(), batch[n]->keys, &batch[n]->soft, loss, scale,
                                       gradient ? gradient->data() : nullptr,
                                       predictions ? &(*predictions)[n] : nullptr, pattern);
        sum += out.loss_sum;
    }
    return sum * scale;
}

std::vector<const TrainingExample*> pointers(std::span<const TrainingExample> examples) {
    std::vector<const TrainingExample*> out;
    out.reserve(examples.size());
    for (const auto& ex : examples) out.push_back(&ex);
    return out;
}

}  // namespace

std::vector<double> encode_window(const Matrix& keys, std::size_t first, const PredictorParams& params) {
    return encode_window_impl(Layout(params), params.values().data(), keys, first);
}

std::vector<double> fuse(std::span<const double> left, std::span<const double> right) {
    if (left.size() != right.size()) throw std::invalid_argument("fuse: window encodings differ in length");
    std::vector<double> h(4 * left.size() + 1);
    fuse_into(left.data(), right.data(), left.size(), h.data(), nullptr);
    return h;
}

double predict(std::size_t position, const Matrix& keys, const PredictorParams& params) {
    const Layout ly(params);
    if (position + 1 < ly.w || position + ly.w >= keys.rows()) {
        throw std::out_of_range("position " + std::to_string(position) + " lacks full windows");
    }
    const double* theta = params.values().data();
    const auto l = encode_window_impl(ly, theta, keys, position + 1 - ly.w);
    const auto r = encode_window_impl(ly, theta, keys, position + 1);
    const auto h = fuse(l, r);
    std::vector<double> z1(ly.hidden);
    return sigmoid(mlp_logit(ly, theta, h.data(), z1.data()));
}

std::vector<std::size_t> candidate_positions(std::size_t length, std::size_t window) {
    std::vector<std::size_t> out;
    if (window == 0) return out;
    for (std::size_t i = window - 1; i + window + 2 <= length; ++i) out.push_back(i);
    return out;
}

std::vector<double> predict_sequence(const Matrix& keys, const PredictorParams& params) {
    std::vector<double> probs;
    sequence_pass(Layout(params), params.values().data(), keys, nullptr, {}, 0.0, nullptr, &probs, nullptr);
    return probs;
}

namespace {
double clamp_probability(double p) { return std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp); }
}  // namespace

double focal_bce(double p, double y, const LossConfig& config) {
    p = clamp_probability(p);
    const double g = config.gamma;
    const double wpos = config.positive_weight;
    if (config.form == FocalForm::kVerbatim) {
        return std::pow(1.0 - p, g) * (-wpos * y * std::log(p) - (1.0 - y) * std::log(1.0 - p));
    }
    return -wpos * y * std::pow(1.0 - p, g) * std::log(p) - (1.0 - y) * std::pow(p, g) * std::log(1.0 - p);
}

double focal_bce_logit_grad(double logit, double y, const LossConfig& config) {
    const double p = sigmoid(logit);
    if (p < kProbabilityClamp || p > 1.0 - kProbabilityClamp) return 0.0;
    const double g = config.gamma;
    const double wpos = config.positive_weight;
    const double q = 1.0 - p;
    double dldp;
    if (config.form == FocalForm::kVerbatim) {
        const double base = -wpos * y * std::log(p) - (1.0 - y) * std::log(q);
        const double dbase = -wpos * y / p + (1.0 - y) / q;
        dldp = -g * std::pow(q, g - 1.0) * base + std::pow(q, g) * dbase;
    } else {
        const double pos = -wpos * y * (-g * std::pow(q, g - 1.0) * std::log(p) + std::pow(q, g) / p);
        const double neg = -(1.0 - y) * (g * std::pow(p, g - 1.0) * std::log(q) - std::pow(p, g) / q);
        dldp = pos + neg;
    }
    return dldp * p * q;
}

double loss_and_gradient(const PredictorParams& params, std::span<const TrainingExample> batch,
                         const LossConfig& loss, std::vector<double>* gradient) {
    return batch_loss(params, pointers(batch), loss, gradient, nullptr, nullptr);
}

namespace {

std::vector<std::size_t> top_positions(const std::vector<double>& values, const std::vector<std::size_t>& candidates,
                                       std::size_t k) {
    std::vector<std::size_t> order = candidates;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    order.resize(std::min(k, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

}  // namespace

BoundaryMetrics boundary_metrics(std::span<const std::vector<double>> predictions,
                                 std::span<const std::vector<double>> labels, std::size_t window, double threshold,
                                 std::size_t topk_max) {
    if (predictions.size() != labels.size()) throw std::invalid_argument("prediction/label count mismatch");
    std::size_t tp = 0, fp = 0, fn = 0;
    double overlap_sum = 0.0;
    std::size_t overlap_count = 0;
    for (std::size_t n = 0; n < predictions.size(); ++n) {
        const auto& pred = predictions[n];
        const auto& lab = labels[n];
        if (pred.size() != lab.size()) throw std::invalid_argument("prediction/label length mismatch");
        const auto candidates = candidate_positions(lab.size(), window);
        std::size_t positives = 0;
        for (std::size_t i : candidates) {
            const bool p = pred[i] >= threshold;
            const bool y = lab[i] >= threshold;
            positives += y;
            tp += p && y;
            fp += p && !y;
            fn += !p && y;
        }
        const std::size_t k = std::min(topk_max, positives);
        if (k == 0) continue;
        const auto a = top_positions(pred, candidates, k);
        const auto b = top_positions(lab, candidates, k);
        std::vector<std::size_t> common;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
        overlap_sum += static_cast<double>(common.size()) / static_cast<double>(k);
        ++overlap_count;
    }
    BoundaryMetrics m;
    if (tp + fp + fn == 0) {
        m.precision = m.recall = m.f1 = 1.0;
    } else {
        m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    }
    m.topk_overlap = overlap_count ? overlap_sum / static_cast<double>(overlap_count) : 1.0;
    return m;
}

BoundaryMetrics evaluate(const PredictorParams& params, std::span<const TrainingExample> examples, double threshold,
                         std::size_t topk_max) {
    std::vector<std::vector<double>> predictions, labels;
    for (const auto& ex : examples) {
        predictions.push_back(predict_sequence(ex.keys, params));
        labels.push_back(ex.soft);
    }
    return boundary_metrics(predictions, labels, params.shape().window, threshold, topk_max);
}

TrainResult train(std::span<const TrainingExample> corpus, PredictorParams params, const TrainConfig& config,
                  std::span<const TrainingExample> validation) {
    if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
    if (config.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
    const std::size_t n_params = params.values().size();
    std::vector<double> m(n_params, 0.0), v(n_params, 0.0), grad;
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed);
    std::uint64_t step = 0;
    TrainResult result{std::move(params), {}};
    auto& theta = result.params.values();

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        // Predictions made during the epoch (before each update) give the
        // running train metrics without a second forward pass.
        std::vector<std::vector<double>> predictions(corpus.size()), labels(corpus.size());
        for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
            std::vector<const TrainingExample*> batch;
            for (std::size_t n = at; n < std::min(order.size(), at + config.batch_size); ++n) {
                batch.push_back(&corpus[order[n]]);
            }
            std::vector<std::vector<double>> batch_predictions;
            const double loss = batch_loss(result.params, batch, config.loss, &grad, &batch_predictions, nullptr);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                         ": loss is " + std::to_string(loss));
            }
            for (std::size_t n = 0; n < batch.size(); ++n) {
                predictions[order[at + n]] = std::move(batch_predictions[n]);
                labels[order[at + n]] = batch[n]->soft;
            }
            loss_sum += loss;
            ++batches;

            ++step;
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t k = 0; k < n_params; ++k) {
                m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * grad[k];
                v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * grad[k] * grad[k];
                theta[k] -= config.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.adam_epsilon);
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = loss_sum / static_cast<double>(batches);
        rec.train = boundary_metrics(predictions, labels, result.params.shape().window, config.threshold,
                                     config.topk_max);
        if (!validation.empty()) rec.validation = evaluate(result.params, validation, config.threshold, config.topk_max);
        result.history.push_back(rec);
    }
    return result;
}

GradCheckResult grad_check(const PredictorParams& params, std::span<const TrainingExample> batch,
                           const GradCheckConfig& config) {
    const auto ptrs = pointers(batch);
    std::vector<double> analytic;
    batch_loss(params, ptrs, config.loss, &analytic, nullptr, nullptr);
    KinkPattern base_pattern;
    batch_loss(params, ptrs, config.loss, nullptr, nullptr, &base_pattern);

    std::mt19937_64 rng(config.seed);
    GradCheckResult result;
    PredictorParams probe = params;
    for (const auto& block : params.blocks()) {
        std::vector<std::size_t> idx(block.size());
        std::iota(idx.begin(), idx.end(), block.offset);
        std::shuffle(idx.begin(), idx.end(), rng);
        idx.resize(std::min(idx.size(), config.samples_per_block));
        for (std::size_t k : idx) {
            const double original = params.values()[k];
            KinkPattern plus_pattern, minus_pattern;
            probe.values()[k] = original + config.step;
            const double plus = batch_loss(probe, ptrs, config.loss, nullptr, nullptr, &plus_pattern);
            probe.values()[k] = original - config.step;
            const double minus = batch_loss(probe, ptrs, config.loss, nullptr, nullptr, &minus_pattern);
            probe.values()[k] = original;
            if (plus_pattern != base_pattern || minus_pattern != base_pattern) {
                ++result.skipped_kinks;
                continue;
            }
            const double numeric = (plus - minus) / (2.0 * config.step);
            const double a = analytic[k] * config.analytic_scale;
            const double magnitude = std::max(std::abs(a), std::abs(numeric));
            const double err = magnitude < config.absolute_floor ? 0.0 : std::abs(a - numeric) / magnitude;
            result.max_relative_error = std::max(result.max_relative_error, err);
            ++result.checked;
        }
    }
    return result;
}

}  // namespace dhsa
