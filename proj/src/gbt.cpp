#include "crosscast/gbt.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace crosscast {

double pinball_loss(double y, double q, double alpha) {
    return y >= q ? alpha * (y - q) : (1.0 - alpha) * (q - y);
}

double RegressionTree::predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[i].feature >= 0)
        i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].value;
}

double QuantileEnsemble::predict(std::span<const double> x) const {
    double f = base_prediction;
    for (const RegressionTree& t : trees)
        f += t.predict(x);  // leaf values are already shrunk
    return f;
}

namespace {

/// The empirical alpha-quantile that minimizes the sample pinball loss:
/// the ceil(alpha*n)-th order statistic. When alpha*n is an integer the
/// minimum is flat between two order statistics; the lower end is used.
double pinball_quantile(std::vector<double>& v, double alpha) {
    auto n = static_cast<int>(v.size());
    int idx = static_cast<int>(std::ceil(alpha * n)) - 1;
    idx = std::clamp(idx, 0, n - 1);
    std::nth_element(v.begin(), v.begin() + idx, v.end());
    return v[idx];
}

double mean_pinball(std::span<const double> y, std::span<const double> f, double alpha) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        s += pinball_loss(y[i], f[i], alpha);
    return s / static_cast<double>(y.size());
}

struct TreeCtx {
    const DataMatrix& data;
    std::span<const double> grad;
    std::span<const double> resid;
    double lr;
    double alpha;
    int max_depth;
    int min_leaf;
    std::span<const int> feats;  // ascending feature ids offered to this tree
    std::vector<double>& f;      // running predictions, updated at leaves
};

int make_leaf(RegressionTree& tree, TreeCtx& ctx, const std::vector<int>& rows) {
    std::vector<double> r;
    r.reserve(rows.size());
    for (int i : rows)
        r.push_back(ctx.resid[i]);
    TreeNode node;
    node.value = ctx.lr * pinball_quantile(r, ctx.alpha);
    tree.nodes.push_back(node);
    for (int i : rows)
        ctx.f[i] += node.value;
    return static_cast<int>(tree.nodes.size()) - 1;
}

int build_node(RegressionTree& tree, TreeCtx& ctx, std::vector<int>& rows, int depth) {
    const int n = static_cast<int>(rows.size());
    if (depth >= ctx.max_depth || n < 2 * ctx.min_leaf)
        return make_leaf(tree, ctx, rows);

    // best split = largest squared-error reduction on the subgradients;
    // ties resolved toward the lower feature id, then lower threshold,
    // by scan order
    double best_gain = 0;
    int best_feat = -1;
    double best_thr = 0;

    std::vector<int> order(rows);
    std::vector<double> prefix(n + 1, 0.0);
    for (int fid : ctx.feats) {
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            double xa = ctx.data.x[a][fid], xb = ctx.data.x[b][fid];
            return xa != xb ? xa < xb : a < b;
        });
        for (int i = 0; i < n; ++i)
            prefix[i + 1] = prefix[i] + ctx.grad[order[i]];
        const double total = prefix[n];
        const double parent = total * total / n;
        for (int p = ctx.min_leaf; p <= n - ctx.min_leaf; ++p) {
            double xa = ctx.data.x[order[p - 1]][fid];
            double xb = ctx.data.x[order[p]][fid];
            if (xa == xb)
                continue;
            double sl = prefix[p];
            double sr = total - sl;
            double gain = sl * sl / p + sr * sr / (n - p) - parent;
            if (gain > best_gain) {
                best_gain = gain;
                best_feat = fid;
                double thr = xa + (xb - xa) / 2;
                if (!(thr < xb))  // adjacent doubles: fall back to a <= xa split
                    thr = xa;
                best_thr = thr;
            }
        }
    }

    if (best_feat < 0)
        return make_leaf(tree, ctx, rows);

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(rows.size());
    for (int i : rows)
        (ctx.data.x[i][best_feat] <= best_thr ? left_rows : right_rows).push_back(i);
    if (static_cast<int>(left_rows.size()) < ctx.min_leaf ||
        static_cast<int>(right_rows.size()) < ctx.min_leaf)
        return make_leaf(tree, ctx, rows);
    rows.clear();
    rows.shrink_to_fit();

    int self = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[self].feature = best_feat;
    tree.nodes[self].threshold = best_thr;
    int left = build_node(tree, ctx, left_rows, depth + 1);
    int right = build_node(tree, ctx, right_rows, depth + 1);
    tree.nodes[self].left = left;
    tree.nodes[self].right = right;
    return self;
}

/// Deterministic feature subset for one boosting round.
std::vector<int> sample_features(const GbtParams& params, double alpha, int round) {
    int take = std::clamp(static_cast<int>(std::ceil(params.feature_subsample * kFeatureCount)),
                          1, kFeatureCount);
    std::vector<int> feats(kFeatureCount);
    std::iota(feats.begin(), feats.end(), 0);
    std::uint64_t state = hash_combine(
        hash_combine(params.seed, std::bit_cast<std::uint64_t>(alpha)),
        static_cast<std::uint64_t>(round));
    for (int i = kFeatureCount - 1; i >= 1; --i) {
        int j = static_cast<int>(mix64(state ^ static_cast<std::uint64_t>(i)) %
                                 static_cast<std::uint64_t>(i + 1));
        std::swap(feats[i], feats[j]);
    }
    feats.resize(take);
    std::sort(feats.begin(), feats.end());
    return feats;
}

}  // namespace

QuantileEnsemble fit_quantile_model(const DataMatrix& data, double alpha,
                                    const GbtParams& params) {
    const auto n = static_cast<int>(data.size());
    if (n < 2 * params.min_samples_leaf)
        throw InsufficientRows("need at least " + std::to_string(2 * params.min_samples_leaf) +
                               " rows, got " + std::to_string(n));

    QuantileEnsemble ens;
    ens.alpha = alpha;
    ens.learning_rate = params.learning_rate;
    {
        std::vector<double> tmp = data.y;
        ens.base_prediction = pinball_quantile(tmp, alpha);
    }

    std::vector<double> f(n, ens.base_prediction);
    std::vector<double> grad(n), resid(n);
    ens.train_loss.reserve(params.n_trees + 1);
    ens.train_loss.push_back(mean_pinball(data.y, f, alpha));
    ens.trees.reserve(params.n_trees);

    for (int t = 0; t < params.n_trees; ++t) {
        for (int i = 0; i < n; ++i) {
            grad[i] = alpha - (data.y[i] < f[i] ? 1.0 : 0.0);
            resid[i] = data.y[i] - f[i];
        }
        std::vector<int> feats = sample_features(params, alpha, t);
        TreeCtx ctx{data,  grad,
                    resid, params.learning_rate,
                    alpha, params.max_depth,
                    params.min_samples_leaf, feats,
                    f};
        RegressionTree tree;
        std::vector<int> rows(n);
        std::iota(rows.begin(), rows.end(), 0);
        build_node(tree, ctx, rows, 0);
        ens.trees.push_back(std::move(tree));
        ens.train_loss.push_back(mean_pinball(data.y, f, alpha));
    }
    return ens;
}

std::array<double, kNumQuantiles> BoostedModel::predict_raw(std::span<const double> x) const {
    if (!trained)
        throw ModelUntrained("predict called before fit");
    std::array<double, kNumQuantiles> out{};
    for (int qi = 0; qi < kNumQuantiles; ++qi)
        out[qi] = models[qi].predict(x);
    return out;
}

BoostedModel fit_boosted_model(const DataMatrix& data, const GbtParams& params) {
    BoostedModel model;
    model.params = params;
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic)
    for (int qi = 0; qi < kNumQuantiles; ++qi) {
        try {
            model.models[qi] = fit_quantile_model(data, kQuantileLevels[qi], params);
        } catch (...) {
#pragma omp critical
            err = std::current_exception();
        }
    }
    if (err)
        std::rethrow_exception(err);
    model.trained = true;
    return model;
}

QuantileForecast predict_quantiles(const BoostedModel& model, const ScaledWindow& window,
                                   std::span<const double> history, double scale_factor) {
    if (!model.trained)
        throw ModelUntrained("predict called before fit");
    double factor = scale_factor <= 0 ? 1.0 : scale_factor;
    QuantileForecast out;
    for (int h = 1; h <= kMaxHorizon; ++h) {
        std::array<double, kNumQuantiles> q;
        if (model.fallback) {
            q.fill(window.last_scaled());
        } else {
            auto features = compute_features(window, history, h).to_array();
            q = model.predict_raw(features);
        }
        std::sort(q.begin(), q.end());  // monotone rearrangement
        for (double& v : q)
            v = std::max(0.0, v * factor);
        out.quantiles[h - 1] = q;
        out.point[h - 1] = q[kNumQuantiles / 2];
    }
    return out;
}

DataMatrix assemble_training_matrix(std::span<const ObservationSeries* const> training_set,
                                    const TrainingScope& scope, DayNumber cutoff_day) {
    DataMatrix data;
    for (const ObservationSeries* series : training_set) {
        std::vector<TrainingRow> rows;
        try {
            rows = make_training_rows(*series);
        } catch (const TooShort&) {
            continue;
        }
        for (const TrainingRow& row : rows) {
            if (series->day_of(row.end_index) >= cutoff_day)
                break;  // rows are ordered by window end
            if (!keep_training_row(scope, series->key, row.end_index))
                continue;
            std::span<const double> history(series->values.data(),
                                            static_cast<std::size_t>(row.end_index) + 1);
            for (int h = 1; h <= kMaxHorizon; ++h) {
                if (!row.has_future(h))
                    continue;
                if (series->day_of(row.end_index + h) >= cutoff_day)
                    continue;
                data.x.push_back(compute_features(row.window, history, h).to_array());
                data.y.push_back(row.future[h - 1]);
            }
        }
    }
    return data;
}

std::map<int, BoostedModel> retrain_schedule(const Corpus& corpus, const StreamKey& target,
                                             const TrainingScope& scope,
                                             std::span<const int> years,
                                             const GbtParams& params) {
    auto training_set = select_training_set(corpus, target, scope);
    std::map<int, BoostedModel> models;
    for (int year : years) {
        DayNumber cutoff = first_day_of_year(year);
        DataMatrix data = assemble_training_matrix(training_set, scope, cutoff);
        BoostedModel model;
        if (static_cast<int>(data.size()) >= 2 * params.min_samples_leaf) {
            model = fit_boosted_model(data, params);
        } else {
            model.params = params;
            model.fallback = true;
            model.trained = true;
        }
        model.scope = to_string(scope.kind);
        model.year = year;
        model.cutoff_day = cutoff;
        models.emplace(year, std::move(model));
    }
    return models;
}

namespace {

nlohmann::json tree_to_json(const RegressionTree& tree) {
    nlohmann::json j;
    auto& feature = j["feature"];
    auto& threshold = j["threshold"];
    auto& left = j["left"];
    auto& right = j["right"];
    auto& value = j["value"];
    for (const TreeNode& n : tree.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
    }
    return j;
}

RegressionTree tree_from_json(const nlohmann::json& j) {
    RegressionTree tree;
    auto size = j.at("feature").size();
    tree.nodes.resize(size);
    for (std::size_t i = 0; i < size; ++i) {
        tree.nodes[i].feature = j.at("feature")[i];
        tree.nodes[i].threshold = j.at("threshold")[i];
        tree.nodes[i].left = j.at("left")[i];
        tree.nodes[i].right = j.at("right")[i];
        tree.nodes[i].value = j.at("value")[i];
    }
    return tree;
}

}  // namespace

void save_model(const BoostedModel& model, const std::string& path) {
    nlohmann::json j;
    j["format"] = "crosscast-gbt-1";
    j["scope"] = model.scope;
    j["year"] = model.year;
    j["cutoff_day"] = model.cutoff_day;
    j["fallback"] = model.fallback;
    j["trained"] = model.trained;
    j["params"] = {{"n_trees", model.params.n_trees},
                   {"learning_rate", model.params.learning_rate},
                   {"max_depth", model.params.max_depth},
                   {"min_samples_leaf", model.params.min_samples_leaf},
                   {"feature_subsample", model.params.feature_subsample},
                   {"seed", model.params.seed}};
    j["features"] = FeatureVector::names();
    auto& models = j["models"];
    for (const QuantileEnsemble& ens : model.models) {
        nlohmann::json m;
        m["alpha"] = ens.alpha;
        m["base_prediction"] = ens.base_prediction;
        m["learning_rate"] = ens.learning_rate;
        m["train_loss"] = ens.train_loss;
        for (const RegressionTree& t : ens.trees)
            m["trees"].push_back(tree_to_json(t));
        models.push_back(std::move(m));
    }
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << j.dump();
}

BoostedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw SchemaError("cannot open " + path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || j.value("format", "") != "crosscast-gbt-1")
        throw SchemaError(path + " is not a crosscast-gbt-1 model file");

    BoostedModel model;
    model.scope = j.at("scope");
    model.year = j.at("year");
    model.cutoff_day = j.at("cutoff_day");
    model.fallback = j.at("fallback");
    model.trained = j.at("trained");
    const auto& p = j.at("params");
    model.params.n_trees = p.at("n_trees");
    model.params.learning_rate = p.at("learning_rate");
    model.params.max_depth = p.at("max_depth");
    model.params.min_samples_leaf = p.at("min_samples_leaf");
    model.params.feature_subsample = p.at("feature_subsample");
    model.params.seed = p.at("seed");
    const auto& models = j.at("models");
    if (models.size() != kNumQuantiles)
        throw SchemaError(path + ": expected " + std::to_string(kNumQuantiles) + " ensembles");
    for (int qi = 0; qi < kNumQuantiles; ++qi) {
        const auto& m = models[qi];
        QuantileEnsemble& ens = model.models[qi];
        ens.alpha = m.at("alpha");
        ens.base_prediction = m.at("base_prediction");
        ens.learning_rate = m.at("learning_rate");
        ens.train_loss = m.at("train_loss").get<std::vector<double>>();
        if (m.contains("trees"))
            for (const auto& t : m.at("trees"))
                ens.trees.push_back(tree_from_json(t));
    }
    return model;
}

}  // namespace crosscast
