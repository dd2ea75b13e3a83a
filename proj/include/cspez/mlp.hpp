#pragma once

// Fully connected regressor: hidden layers of Dense -> LayerNorm -> SiLU and
// a sigmoid output unit, trained with Adam on mean squared error.

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "cspez/surrogate.hpp"

namespace cspez {

class ModelError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

inline constexpr float kLayerNormEpsilon = 1e-6f;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }

struct HiddenLayer {
    Eigen::MatrixXf weight;  // out x in
    Eigen::VectorXf bias;
    Eigen::VectorXf gain;
    Eigen::VectorXf offset;
};

class MlpModel {
   public:
    MlpModel() = default;

    /// Lecun-normal weights, zero biases, unit LayerNorm gain.
    static MlpModel initialize(const std::vector<int>& widths, RngStream& rng);
    static std::vector<int> default_widths() { return {kFeatureCount, 512, 256, 256, 128, 1}; }

    bool empty() const { return hidden_.empty(); }
    const std::vector<int>& widths() const { return widths_; }

    /// Sigmoid output in [0, 1].
    double forward(const FeatureVector& f) const;
    /// Pre-sigmoid output.
    double logit(const FeatureVector& f) const;
    /// d forward / d features.
    FeatureVector input_gradient(const FeatureVector& f) const;
    /// d logit / d features.
    FeatureVector logit_gradient(const FeatureVector& f) const;

    /// Logits for rows of `features` (n x 14) and, when requested, the
    /// per-row input gradient of the logit (n x 14).
    void logit_batch(const Eigen::MatrixXd& features, Eigen::VectorXd& logits, Eigen::MatrixXd* gradients) const;

    /// Normalised pre-activation of hidden layer `index`, before gain and offset (testing aid).
    Eigen::VectorXd normalized_preactivation(const FeatureVector& f, std::size_t index) const;

    bool in_training_box(const FeatureVector& f) const { return ranges_.contains(f, 1e-12); }

    const FeatureRanges& ranges() const { return ranges_; }
    void set_ranges(const FeatureRanges& r) { ranges_ = r; }
    const Eigen::VectorXd& feature_mean() const { return feature_mean_; }
    const Eigen::VectorXd& feature_scale() const { return feature_scale_; }
    void set_standardization(const Eigen::VectorXd& mean, const Eigen::VectorXd& scale);

    std::vector<HiddenLayer>& hidden() { return hidden_; }
    const std::vector<HiddenLayer>& hidden() const { return hidden_; }
    Eigen::VectorXf& output_weight() { return output_weight_; }
    const Eigen::VectorXf& output_weight() const { return output_weight_; }
    float& output_bias() { return output_bias_; }
    float output_bias() const { return output_bias_; }

    /// Rebuilds the double-precision inference copy; call after editing weights.
    void refresh();
    void check_shapes() const;

    nlohmann::json& metadata() { return metadata_; }
    const nlohmann::json& metadata() const { return metadata_; }

    void save(const std::filesystem::path& path) const;
    static MlpModel load(const std::filesystem::path& path);

   private:
    struct InferenceLayer {
        Eigen::MatrixXd weight;
        Eigen::VectorXd bias, gain, offset;
    };

    Eigen::VectorXd standardize(const FeatureVector& f) const;
    double backprop_logit(const FeatureVector& f, FeatureVector* grad) const;

    std::vector<int> widths_;
    std::vector<HiddenLayer> hidden_;
    Eigen::VectorXf output_weight_;
    float output_bias_ = 0.0f;
    Eigen::VectorXd feature_mean_ = Eigen::VectorXd::Zero(kFeatureCount);
    Eigen::VectorXd feature_scale_ = Eigen::VectorXd::Ones(kFeatureCount);
    FeatureRanges ranges_ = FeatureRanges::defaults();
    nlohmann::json metadata_ = nlohmann::json::object();

    std::vector<InferenceLayer> infer_;
    Eigen::VectorXd infer_out_w_;
    double infer_out_b_ = 0.0;
};

struct TrainHyper {
    double learning_rate = 1e-3;
    int batch_size = 1024;
    int max_epochs = 200;
    int patience = 20;
    /// Fraction held out for validation; 0 trains on everything and stops on training loss.
    double validation_fraction = 0.1;
    std::uint64_t seed = 1;
    std::vector<int> widths = MlpModel::default_widths();
    bool verbose = false;
};

nlohmann::json hyper_to_json(const TrainHyper& h);
/// Strict: unknown keys rejected, missing keys keep defaults.
TrainHyper hyper_from_json(const nlohmann::json& j, TrainHyper base = {});

struct TrainReport {
    MlpModel model;
    double train_mse = 0.0;
    double validation_mse = 0.0;
    int epochs_run = 0;
    int best_epoch = 0;
    std::vector<double> validation_history;
    std::vector<std::size_t> validation_indices;
};

TrainReport train(const TrainingSet& ts, const TrainHyper& hyper);

/// Mean squared error of the model on the given rows.
double evaluate_mse(const MlpModel& model, const TrainingSet& ts, const std::vector<std::size_t>& rows);

}  // namespace cspez
