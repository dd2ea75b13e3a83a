#include "cspez/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>

namespace cspez {

namespace {

constexpr char kModelMagic[8] = {'C', 'S', 'P', 'Z', 'M', 'L', 'P', '1'};
constexpr std::uint32_t kModelVersion = 1;

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>;
using VecF = Eigen::Matrix<float, Eigen::Dynamic, 1>;
using RowF = Eigen::Matrix<float, 1, Eigen::Dynamic>;

// Row-wise LayerNorm over features of z (batch x width).
void layer_norm_rows(const MatF& z, MatF& xhat, VecF& inv_std) {
    const VecF mean = z.rowwise().mean();
    xhat = z.colwise() - mean;
    const VecF var = xhat.array().square().rowwise().mean();
    inv_std = (var.array() + kLayerNormEpsilon).rsqrt();
    xhat = xhat.array().colwise() * inv_std.array();
}

template <typename Mat>
Mat sigmoid_of(const Mat& x) {
    return (1.0 + (-x.array()).exp()).inverse().matrix();
}

struct LayerCache {
    MatF input;
    MatF xhat;
    VecF inv_std;
    MatF normed;
    MatF out;
};

struct Gradients {
    std::vector<MatF> w;
    std::vector<VecF> b, gain, offset;
    VecF out_w;
    float out_b = 0.0f;
};

// Flat views of every trainable tensor, used by the optimiser.
struct ParamView {
    float* data;
    Eigen::Index size;
};

std::vector<ParamView> param_views(MlpModel& m) {
    std::vector<ParamView> v;
    for (auto& l : m.hidden()) {
        v.push_back({l.weight.data(), l.weight.size()});
        v.push_back({l.bias.data(), l.bias.size()});
        v.push_back({l.gain.data(), l.gain.size()});
        v.push_back({l.offset.data(), l.offset.size()});
    }
    v.push_back({m.output_weight().data(), m.output_weight().size()});
    v.push_back({&m.output_bias(), 1});
    return v;
}

std::vector<ParamView> grad_views(Gradients& g) {
    std::vector<ParamView> v;
    for (std::size_t i = 0; i < g.w.size(); ++i) {
        v.push_back({g.w[i].data(), g.w[i].size()});
        v.push_back({g.b[i].data(), g.b[i].size()});
        v.push_back({g.gain[i].data(), g.gain[i].size()});
        v.push_back({g.offset[i].data(), g.offset[i].size()});
    }
    v.push_back({g.out_w.data(), g.out_w.size()});
    v.push_back({&g.out_b, 1});
    return v;
}

VecF forward_train(const MlpModel& m, const MatF& x, std::vector<LayerCache>& caches) {
    caches.resize(m.hidden().size());
    const MatF* in = &x;
    for (std::size_t l = 0; l < m.hidden().size(); ++l) {
        const HiddenLayer& layer = m.hidden()[l];
        LayerCache& c = caches[l];
        c.input = *in;
        MatF z = (*in) * layer.weight.transpose();
        z.rowwise() += layer.bias.transpose();
        layer_norm_rows(z, c.xhat, c.inv_std);
        c.normed = (c.xhat.array().rowwise() * layer.gain.transpose().array()).rowwise() + layer.offset.transpose().array();
        c.out = (c.normed.array() * sigmoid_of(c.normed).array()).matrix();
        in = &c.out;
    }
    VecF s = (*in) * m.output_weight();
    s.array() += m.output_bias();
    return sigmoid_of(s);
}

// Gradient of mean squared error for a batch; returns the batch loss.
float backward(const MlpModel& m, const std::vector<LayerCache>& caches, const VecF& p, const VecF& y, Gradients& g) {
    const float batch = static_cast<float>(p.size());
    const VecF diff = p - y;
    const float loss = diff.squaredNorm() / batch;
    const VecF ds = (2.0f / batch) * (diff.array() * p.array() * (1.0f - p.array())).matrix();
    const MatF& top = caches.back().out;
    g.out_w = top.transpose() * ds;
    g.out_b = ds.sum();
    MatF dh = ds * m.output_weight().transpose();

    const std::size_t n = m.hidden().size();
    g.w.resize(n);
    g.b.resize(n);
    g.gain.resize(n);
    g.offset.resize(n);
    for (std::size_t li = n; li-- > 0;) {
        const HiddenLayer& layer = m.hidden()[li];
        const LayerCache& c = caches[li];
        const MatF sg = sigmoid_of(c.normed);
        const MatF dn = (dh.array() * sg.array() * (1.0f + c.normed.array() * (1.0f - sg.array()))).matrix();
        g.gain[li] = (dn.array() * c.xhat.array()).colwise().sum().transpose();
        g.offset[li] = dn.colwise().sum().transpose();
        const MatF dxhat = (dn.array().rowwise() * layer.gain.transpose().array()).matrix();
        const VecF m1 = dxhat.rowwise().mean();
        const VecF m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
        MatF dz = dxhat;
        dz.colwise() -= m1;
        dz -= (c.xhat.array().colwise() * m2.array()).matrix();
        dz = (dz.array().colwise() * c.inv_std.array()).matrix();
        g.w[li] = dz.transpose() * c.input;
        g.b[li] = dz.colwise().sum().transpose();
        if (li > 0) dh = dz * layer.weight;
    }
    return loss;
}

MatF gather_rows(const std::vector<Eigen::VectorXf>& rows, const std::vector<std::size_t>& idx, std::size_t begin,
                 std::size_t end) {
    MatF x(static_cast<Eigen::Index>(end - begin), kFeatureCount);
    for (std::size_t i = begin; i < end; ++i) x.row(static_cast<Eigen::Index>(i - begin)) = rows[idx[i]].transpose();
    return x;
}

float batched_mse(const MlpModel& m, const std::vector<Eigen::VectorXf>& rows, const std::vector<double>& labels,
                  const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0f;
    std::vector<LayerCache> caches;
    double acc = 0.0;
    constexpr std::size_t chunk = 4096;
    for (std::size_t b = 0; b < idx.size(); b += chunk) {
        const std::size_t e = std::min(idx.size(), b + chunk);
        const VecF p = forward_train(m, gather_rows(rows, idx, b, e), caches);
        for (std::size_t i = b; i < e; ++i) {
            const double d = static_cast<double>(p[static_cast<Eigen::Index>(i - b)]) - labels[idx[i]];
            acc += d * d;
        }
    }
    return static_cast<float>(acc / static_cast<double>(idx.size()));
}

}  // namespace

MlpModel MlpModel::initialize(const std::vector<int>& widths, RngStream& rng) {
    if (widths.size() < 2 || widths.front() != kFeatureCount || widths.back() != 1) {
        throw ModelError("layer widths must start at 14 inputs and end in a single output");
    }
    MlpModel m;
    m.widths_ = widths;
    for (std::size_t l = 0; l + 2 < widths.size(); ++l) {
        const int in = widths[l];
        const int out = widths[l + 1];
        HiddenLayer h;
        h.weight.resize(out, in);
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(in));
        for (Eigen::Index i = 0; i < h.weight.size(); ++i) h.weight.data()[i] = static_cast<float>(std_dev * rng.normal());
        h.bias = Eigen::VectorXf::Zero(out);
        h.gain = Eigen::VectorXf::Ones(out);
        h.offset = Eigen::VectorXf::Zero(out);
        m.hidden_.push_back(std::move(h));
    }
    const int last = widths[widths.size() - 2];
    m.output_weight_.resize(last);
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(last));
    for (Eigen::Index i = 0; i < last; ++i) m.output_weight_[i] = static_cast<float>(std_dev * rng.normal());
    m.output_bias_ = 0.0f;
    m.refresh();
    return m;
}

void MlpModel::set_standardization(const Eigen::VectorXd& mean, const Eigen::VectorXd& scale) {
    if (mean.size() != kFeatureCount || scale.size() != kFeatureCount) throw ModelError("standardization must have 14 entries");
    if ((scale.array() <= 0.0).any() || !mean.allFinite() || !scale.allFinite()) {
        throw ModelError("standardization scales must be positive and finite");
    }
    feature_mean_ = mean;
    feature_scale_ = scale;
}

void MlpModel::check_shapes() const {
    if (widths_.size() < 2 || hidden_.size() + 2 != widths_.size()) throw ModelError("model layer count does not match widths");
    for (std::size_t l = 0; l < hidden_.size(); ++l) {
        const auto& h = hidden_[l];
        const int in = widths_[l];
        const int out = widths_[l + 1];
        if (h.weight.rows() != out || h.weight.cols() != in || h.bias.size() != out || h.gain.size() != out ||
            h.offset.size() != out) {
            throw ModelError("hidden layer " + std::to_string(l) + " has inconsistent shapes");
        }
    }
    if (output_weight_.size() != widths_[widths_.size() - 2]) throw ModelError("output layer has inconsistent shape");
}

void MlpModel::refresh() {
    check_shapes();
    infer_.clear();
    for (const auto& h : hidden_) {
        infer_.push_back({h.weight.cast<double>(), h.bias.cast<double>(), h.gain.cast<double>(), h.offset.cast<double>()});
    }
    infer_out_w_ = output_weight_.cast<double>();
    infer_out_b_ = static_cast<double>(output_bias_);
}

Eigen::VectorXd MlpModel::standardize(const FeatureVector& f) const {
    Eigen::VectorXd x(kFeatureCount);
    for (int i = 0; i < kFeatureCount; ++i) x[i] = (f[static_cast<std::size_t>(i)] - feature_mean_[i]) / feature_scale_[i];
    return x;
}

double MlpModel::backprop_logit(const FeatureVector& f, FeatureVector* grad) const {
    if (infer_.empty()) throw ModelError("surrogate model is empty");
    struct Cache {
        Eigen::VectorXd xhat, normed;
        double inv_std;
    };
    std::vector<Cache> caches(infer_.size());
    Eigen::VectorXd h = standardize(f);
    for (std::size_t l = 0; l < infer_.size(); ++l) {
        const auto& L = infer_[l];
        Eigen::VectorXd z = L.weight * h + L.bias;
        const double mean = z.mean();
        z.array() -= mean;
        const double var = z.squaredNorm() / static_cast<double>(z.size());
        caches[l].inv_std = 1.0 / std::sqrt(var + static_cast<double>(kLayerNormEpsilon));
        caches[l].xhat = z * caches[l].inv_std;
        caches[l].normed = caches[l].xhat.cwiseProduct(L.gain) + L.offset;
        h = caches[l].normed.unaryExpr([](double v) { return silu(v); });
    }
    const double s = infer_out_w_.dot(h) + infer_out_b_;
    if (grad != nullptr) {
        Eigen::VectorXd dh = infer_out_w_;
        for (std::size_t l = infer_.size(); l-- > 0;) {
            const auto& L = infer_[l];
            const auto& c = caches[l];
            const Eigen::VectorXd dn = dh.binaryExpr(c.normed, [](double g, double x) {
                const double sg = sigmoid(x);
                return g * sg * (1.0 + x * (1.0 - sg));
            });
            const Eigen::VectorXd dxhat = dn.cwiseProduct(L.gain);
            const double m1 = dxhat.mean();
            const double m2 = dxhat.dot(c.xhat) / static_cast<double>(dxhat.size());
            const Eigen::VectorXd dz = c.inv_std * (dxhat.array() - m1 - c.xhat.array() * m2).matrix();
            dh = L.weight.transpose() * dz;
        }
        for (int i = 0; i < kFeatureCount; ++i) (*grad)[static_cast<std::size_t>(i)] = dh[i] / feature_scale_[i];
    }
    return s;
}

double MlpModel::logit(const FeatureVector& f) const { return backprop_logit(f, nullptr); }

double MlpModel::forward(const FeatureVector& f) const { return sigmoid(logit(f)); }

FeatureVector MlpModel::logit_gradient(const FeatureVector& f) const {
    FeatureVector g{};
    backprop_logit(f, &g);
    return g;
}

FeatureVector MlpModel::input_gradient(const FeatureVector& f) const {
    FeatureVector g{};
    const double p = sigmoid(backprop_logit(f, &g));
    for (double& x : g) x *= p * (1.0 - p);
    return g;
}

void MlpModel::logit_batch(const Eigen::MatrixXd& features, Eigen::VectorXd& logits, Eigen::MatrixXd* gradients) const {
    if (infer_.empty()) throw ModelError("surrogate model is empty");
    if (features.cols() != kFeatureCount) throw ModelError("logit_batch expects 14 feature columns");
    const Eigen::Index n = features.rows();
    struct Cache {
        Eigen::MatrixXd xhat, normed;
        Eigen::VectorXd inv_std;
    };
    std::vector<Cache> caches(infer_.size());
    Eigen::MatrixXd h = (features.rowwise() - feature_mean_.transpose()).array().rowwise() / feature_scale_.transpose().array();
    for (std::size_t l = 0; l < infer_.size(); ++l) {
        const auto& L = infer_[l];
        Eigen::MatrixXd z = h * L.weight.transpose();
        z.rowwise() += L.bias.transpose();
        const Eigen::VectorXd mean = z.rowwise().mean();
        z.colwise() -= mean;
        const Eigen::VectorXd var = z.array().square().rowwise().mean();
        caches[l].inv_std = (var.array() + static_cast<double>(kLayerNormEpsilon)).rsqrt();
        caches[l].xhat = z.array().colwise() * caches[l].inv_std.array();
        caches[l].normed = (caches[l].xhat.array().rowwise() * L.gain.transpose().array()).rowwise() + L.offset.transpose().array();
        h = caches[l].normed.unaryExpr([](double v) { return silu(v); });
    }
    logits = h * infer_out_w_;
    logits.array() += infer_out_b_;
    if (gradients == nullptr) return;
    Eigen::MatrixXd dh = Eigen::VectorXd::Ones(n) * infer_out_w_.transpose();
    for (std::size_t l = infer_.size(); l-- > 0;) {
        const auto& L = infer_[l];
        const auto& c = caches[l];
        const Eigen::MatrixXd dn = dh.binaryExpr(c.normed, [](double g, double x) {
            const double sg = sigmoid(x);
            return g * sg * (1.0 + x * (1.0 - sg));
        });
        const Eigen::MatrixXd dxhat = dn.array().rowwise() * L.gain.transpose().array();
        const Eigen::VectorXd m1 = dxhat.rowwise().mean();
        const Eigen::VectorXd m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
        Eigen::MatrixXd dz = dxhat;
        dz.colwise() -= m1;
        dz -= (c.xhat.array().colwise() * m2.array()).matrix();
        dz = dz.array().colwise() * c.inv_std.array();
        dh = dz * L.weight;
    }
    *gradients = dh.array().rowwise() / feature_scale_.transpose().array();
}

Eigen::VectorXd MlpModel::normalized_preactivation(const FeatureVector& f, std::size_t index) const {
    if (index >= infer_.size()) throw ModelError("no hidden layer " + std::to_string(index));
    Eigen::VectorXd h = standardize(f);
    for (std::size_t l = 0;; ++l) {
        const auto& L = infer_[l];
        Eigen::VectorXd z = L.weight * h + L.bias;
        z.array() -= z.mean();
        const double var = z.squaredNorm() / static_cast<double>(z.size());
        const Eigen::VectorXd xhat = z / std::sqrt(var + static_cast<double>(kLayerNormEpsilon));
        if (l == index) return xhat;
        h = (xhat.cwiseProduct(L.gain) + L.offset).unaryExpr([](double v) { return silu(v); });
    }
}

void MlpModel::save(const std::filesystem::path& path) const {
    check_shapes();
    nlohmann::json header;
    header["format"] = "cspez-mlp";
    header["version"] = kModelVersion;
    header["widths"] = widths_;
    header["layer_norm_epsilon"] = static_cast<double>(kLayerNormEpsilon);
    header["feature_mean"] = std::vector<double>(feature_mean_.data(), feature_mean_.data() + feature_mean_.size());
    header["feature_scale"] = std::vector<double>(feature_scale_.data(), feature_scale_.data() + feature_scale_.size());
    header["ranges"] = ranges_to_json(ranges_);
    header["metadata"] = metadata_;
    const std::string text = header.dump();
    const std::uint64_t header_len = text.size();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ModelError("cannot write model file " + path.string());
    out.write(kModelMagic, sizeof(kModelMagic));
    out.write(reinterpret_cast<const char*>(&kModelVersion), sizeof(kModelVersion));
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    auto put = [&](const float* data, Eigen::Index n) {
        out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * static_cast<Eigen::Index>(sizeof(float))));
    };
    for (const auto& h : hidden_) {
        // weights row-major (out x in)
        const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = h.weight;
        put(w.data(), w.size());
        put(h.bias.data(), h.bias.size());
        put(h.gain.data(), h.gain.size());
        put(h.offset.data(), h.offset.size());
    }
    put(output_weight_.data(), output_weight_.size());
    put(&output_bias_, 1);
    if (!out) throw ModelError("failed writing model file " + path.string());
}

MlpModel MlpModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot read model file " + path.string());
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t header_len = 0;
    in.read(magic, sizeof(magic));
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) throw ModelError(path.string() + " is not a model file");
    if (version != kModelVersion) throw ModelError("unsupported model version " + std::to_string(version));
    if (header_len > (1u << 26)) throw ModelError("model header is implausibly large");
    std::string text(header_len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(header_len));
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model header: ") + e.what());
    }
    MlpModel m;
    try {
        m.widths_ = header.at("widths").get<std::vector<int>>();
        const auto mean = header.at("feature_mean").get<std::vector<double>>();
        const auto scale = header.at("feature_scale").get<std::vector<double>>();
        if (mean.size() != kFeatureCount || scale.size() != kFeatureCount) throw ModelError("bad standardization size");
        m.set_standardization(Eigen::Map<const Eigen::VectorXd>(mean.data(), kFeatureCount),
                              Eigen::Map<const Eigen::VectorXd>(scale.data(), kFeatureCount));
        m.ranges_ = ranges_from_json(header.at("ranges"));
        if (header.contains("metadata")) m.metadata_ = header.at("metadata");
    } catch (const nlohmann::json::exception& e) {
        throw ModelError(std::string("malformed model header: ") + e.what());
    }
    if (m.widths_.size() < 2 || m.widths_.front() != kFeatureCount || m.widths_.back() != 1) {
        throw ModelError("model widths must run from 14 inputs to 1 output");
    }
    auto get = [&](float* data, Eigen::Index n) {
        in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * static_cast<Eigen::Index>(sizeof(float))));
        if (!in) throw ModelError("model payload is truncated");
    };
    for (std::size_t l = 0; l + 2 < m.widths_.size(); ++l) {
        const int inw = m.widths_[l];
        const int outw = m.widths_[l + 1];
        if (inw <= 0 || outw <= 0) throw ModelError("model widths must be positive");
        HiddenLayer h;
        Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(outw, inw);
        get(w.data(), w.size());
        h.weight = w;
        h.bias.resize(outw);
        h.gain.resize(outw);
        h.offset.resize(outw);
        get(h.bias.data(), outw);
        get(h.gain.data(), outw);
        get(h.offset.data(), outw);
        m.hidden_.push_back(std::move(h));
    }
    m.output_weight_.resize(m.widths_[m.widths_.size() - 2]);
    get(m.output_weight_.data(), m.output_weight_.size());
    get(&m.output_bias_, 1);
    if (in.peek() != std::char_traits<char>::eof()) throw ModelError("model file has trailing bytes");
    m.refresh();
    return m;
}

nlohmann::json hyper_to_json(const TrainHyper& h) {
    return {{"learning_rate", h.learning_rate}, {"batch_size", h.batch_size},
            {"max_epochs", h.max_epochs},       {"patience", h.patience},
            {"validation_fraction", h.validation_fraction}, {"seed", h.seed},
            {"widths", h.widths}};
}

TrainHyper hyper_from_json(const nlohmann::json& j, TrainHyper h) {
    if (!j.is_object()) throw std::invalid_argument("hyperparameters: expected an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "learning_rate") {
            h.learning_rate = value.get<double>();
        } else if (key == "batch_size") {
            h.batch_size = value.get<int>();
        } else if (key == "max_epochs") {
            h.max_epochs = value.get<int>();
        } else if (key == "patience") {
            h.patience = value.get<int>();
        } else if (key == "validation_fraction") {
            h.validation_fraction = value.get<double>();
        } else if (key == "seed") {
            h.seed = value.get<std::uint64_t>();
        } else if (key == "widths") {
            h.widths = value.get<std::vector<int>>();
        } else if (key == "verbose") {
            h.verbose = value.get<bool>();
        } else {
            throw std::invalid_argument("hyperparameters: unknown key '" + key + "'");
        }
    }
    if (!(h.learning_rate > 0.0) || h.batch_size < 1 || h.max_epochs < 1 || h.patience < 1 ||
        h.validation_fraction < 0.0 || h.validation_fraction >= 1.0) {
        throw std::invalid_argument("hyperparameters out of range");
    }
    return h;
}

double evaluate_mse(const MlpModel& model, const TrainingSet& ts, const std::vector<std::size_t>& rows) {
    if (rows.empty()) return 0.0;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), kFeatureCount);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int c = 0; c < kFeatureCount; ++c) x(static_cast<Eigen::Index>(i), c) = ts.features[rows[i]][static_cast<std::size_t>(c)];
    }
    Eigen::VectorXd logits;
    model.logit_batch(x, logits, nullptr);
    double acc = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double d = sigmoid(logits[static_cast<Eigen::Index>(i)]) - ts.labels[rows[i]];
        acc += d * d;
    }
    return acc / static_cast<double>(rows.size());
}

TrainReport train(const TrainingSet& ts, const TrainHyper& hyper) {
    if (ts.size() == 0 || ts.features.size() != ts.labels.size()) throw TrainingError("training set is empty or inconsistent");
    for (double y : ts.labels) {
        if (!(y >= 0.0 && y <= 1.0)) throw TrainingError("labels must lie in [0, 1]");
    }
    RngStream rng(hyper.seed);

    std::vector<std::size_t> order(ts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    const std::size_t n_val = static_cast<std::size_t>(std::floor(hyper.validation_fraction * static_cast<double>(ts.size())));
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> tr(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    if (tr.empty()) throw TrainingError("no training rows left after the validation split");

    // Standardisation statistics from the training rows.
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(kFeatureCount);
    Eigen::VectorXd sq = Eigen::VectorXd::Zero(kFeatureCount);
    for (std::size_t i : tr) {
        for (int c = 0; c < kFeatureCount; ++c) mean[c] += ts.features[i][static_cast<std::size_t>(c)];
    }
    mean /= static_cast<double>(tr.size());
    for (std::size_t i : tr) {
        for (int c = 0; c < kFeatureCount; ++c) {
            const double d = ts.features[i][static_cast<std::size_t>(c)] - mean[c];
            sq[c] += d * d;
        }
    }
    Eigen::VectorXd scale = (sq / static_cast<double>(tr.size())).cwiseSqrt();
    for (int c = 0; c < kFeatureCount; ++c) {
        if (!(scale[c] > 1e-12)) scale[c] = 1.0;
    }

    MlpModel model = MlpModel::initialize(hyper.widths, rng);
    model.set_standardization(mean, scale);

    std::vector<Eigen::VectorXf> rows(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        Eigen::VectorXf r(kFeatureCount);
        for (int c = 0; c < kFeatureCount; ++c) {
            r[c] = static_cast<float>((ts.features[i][static_cast<std::size_t>(c)] - mean[c]) / scale[c]);
        }
        rows[i] = r;
    }

    auto params = param_views(model);
    std::vector<std::vector<float>> m1, m2;
    for (const auto& p : params) {
        m1.emplace_back(static_cast<std::size_t>(p.size), 0.0f);
        m2.emplace_back(static_cast<std::size_t>(p.size), 0.0f);
    }
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double adam_eps = 1e-8;

    const std::size_t batch = static_cast<std::size_t>(hyper.batch_size);
    const std::size_t steps_per_epoch = (tr.size() + batch - 1) / batch;
    const double total_steps = static_cast<double>(steps_per_epoch) * hyper.max_epochs;

    TrainReport report;
    MlpModel best = model;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    long step = 0;
    std::vector<LayerCache> caches;
    Gradients grads;

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        std::shuffle(tr.begin(), tr.end(), rng.engine());
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < tr.size(); b += batch) {
            const std::size_t e = std::min(tr.size(), b + batch);
            const MatF x = gather_rows(rows, tr, b, e);
            VecF y(static_cast<Eigen::Index>(e - b));
            for (std::size_t i = b; i < e; ++i) y[static_cast<Eigen::Index>(i - b)] = static_cast<float>(ts.labels[tr[i]]);
            const VecF p = forward_train(model, x, caches);
            const float loss = backward(model, caches, p, y, grads);
            if (!std::isfinite(loss)) {
                throw TrainingError("training diverged at epoch " + std::to_string(epoch) + " (non-finite loss)");
            }
            epoch_loss += static_cast<double>(loss) * static_cast<double>(e - b);

            ++step;
            const double lr = hyper.learning_rate * 0.5 *
                              (1.0 + std::cos(std::numbers::pi * std::min(1.0, static_cast<double>(step - 1) / total_steps)));
            const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
            const auto gv = grad_views(grads);
            for (std::size_t k = 0; k < params.size(); ++k) {
                float* w = params[k].data;
                const float* g = gv[k].data;
                auto& mk = m1[k];
                auto& vk = m2[k];
                for (Eigen::Index i = 0; i < params[k].size; ++i) {
                    const auto ui = static_cast<std::size_t>(i);
                    mk[ui] = static_cast<float>(beta1 * mk[ui] + (1.0 - beta1) * g[i]);
                    vk[ui] = static_cast<float>(beta2 * vk[ui] + (1.0 - beta2) * g[i] * g[i]);
                    const double mhat = mk[ui] / c1;
                    const double vhat = vk[ui] / c2;
                    w[i] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + adam_eps));
                }
            }
        }
        epoch_loss /= static_cast<double>(tr.size());
        const double monitored = val.empty() ? epoch_loss : batched_mse(model, rows, ts.labels, val);
        report.validation_history.push_back(monitored);
        report.epochs_run = epoch + 1;
        if (hyper.verbose) {
            std::cerr << "epoch " << epoch + 1 << " train_mse " << epoch_loss << " monitored_mse " << monitored << '\n';
        }
        if (!std::isfinite(monitored)) throw TrainingError("validation loss became non-finite");
        if (monitored < best_loss) {
            best_loss = monitored;
            best = model;
            report.best_epoch = epoch + 1;
            since_best = 0;
        } else if (++since_best >= hyper.patience) {
            break;
        }
    }

    best.refresh();
    best.metadata()["train"] = hyper_to_json(hyper);
    best.metadata()["train"]["best_epoch"] = report.best_epoch;
    report.model = std::move(best);
    report.train_mse = evaluate_mse(report.model, ts, tr);
    report.validation_mse = val.empty() ? report.train_mse : evaluate_mse(report.model, ts, val);
    report.validation_indices = val;
    std::sort(report.validation_indices.begin(), report.validation_indices.end());
    return report;
}

}  // namespace cspez
