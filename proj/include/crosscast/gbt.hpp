#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "crosscast/features.hpp"

namespace crosscast {

/// The seven quantile levels every boosted model is trained at.
inline constexpr std::array<double, 7> kQuantileLevels = {0.025, 0.1, 0.25, 0.5,
                                                          0.75,  0.9, 0.975};
inline constexpr int kNumQuantiles = 7;

/// alpha*(y-q) when y >= q, (1-alpha)*(q-y) otherwise.
double pinball_loss(double y, double q, double alpha);

struct GbtParams {
    int n_trees = 300;
    double learning_rate = 0.1;
    int max_depth = 6;
    int min_samples_leaf = 20;
    double feature_subsample = 0.8;  // fraction of features offered per tree
    std::uint64_t seed = 0;
};

/// Flat node store; feature == -1 marks a leaf.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(std::span<const double> x) const;
};

/// Boosted trees for one quantile level. Splits follow the squared error
/// of the pinball subgradient (alpha - 1{y < F}); each leaf then adds the
/// learning-rate-shrunk alpha-quantile of the in-leaf residuals, which by
/// convexity never increases the training pinball loss.
struct QuantileEnsemble {
    double alpha = 0.5;
    double base_prediction = 0.0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    std::vector<double> train_loss;  // mean pinball loss after each round

    double predict(std::span<const double> x) const;
};

struct DataMatrix {
    std::vector<std::array<double, kFeatureCount>> x;
    std::vector<double> y;

    std::size_t size() const { return y.size(); }
};

/// Fits one ensemble. Requires at least 2 * min_samples_leaf rows.
QuantileEnsemble fit_quantile_model(const DataMatrix& data, double alpha,
                                    const GbtParams& params);

/// All seven quantile ensembles over the same rows, plus training
/// metadata. A fallback model (too few rows) predicts the window's last
/// value at every level.
struct BoostedModel {
    std::array<QuantileEnsemble, kNumQuantiles> models;
    GbtParams params;
    std::string scope;
    DayNumber cutoff_day = 0;  // trained on data strictly before this day
    int year = 0;
    bool fallback = false;
    bool trained = false;

    /// Raw per-level outputs on the scaled axis, in kQuantileLevels
    /// order, before monotone rearrangement.
    std::array<double, kNumQuantiles> predict_raw(std::span<const double> x) const;
};

/// The seven alpha ensembles train independently (in parallel when
/// OpenMP is enabled).
BoostedModel fit_boosted_model(const DataMatrix& data, const GbtParams& params);

/// Per horizon: the seven quantiles sorted ascending, on the original
/// count scale, clamped at 0. point is the 0.5 entry.
struct QuantileForecast {
    std::array<std::array<double, kNumQuantiles>, kMaxHorizon> quantiles{};
    std::array<double, kMaxHorizon> point{};
};

/// Evaluates the model on the window's features for horizons 1..4,
/// applies monotone rearrangement, unscales, clamps at 0.
QuantileForecast predict_quantiles(const BoostedModel& model, const ScaledWindow& window,
                                   std::span<const double> history, double scale_factor);

/// One (features, scaled future) instance per training row and available
/// horizon, restricted to rows whose window and future both predate
/// cutoff_day. all_data scopes drop rows per keep_training_row.
DataMatrix assemble_training_matrix(std::span<const ObservationSeries* const> training_set,
                                    const TrainingScope& scope, DayNumber cutoff_day);

/// One model per requested calendar year, each trained on data strictly
/// before that year's first day. Years with too few rows yield flagged
/// persistence fallbacks rather than errors.
std::map<int, BoostedModel> retrain_schedule(const Corpus& corpus, const StreamKey& target,
                                             const TrainingScope& scope,
                                             std::span<const int> years,
                                             const GbtParams& params);

/// JSON tree dump: per tree, split feature, threshold, children, leaf
/// value; plus hyperparameters and metadata.
void save_model(const BoostedModel& model, const std::string& path);
BoostedModel load_model(const std::string& path);

}  // namespace crosscast
