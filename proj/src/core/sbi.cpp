#include "sbi.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "threading.hpp"

namespace stxm {

EtaParams sample_prior(const PriorSpec& spec, std::uint64_t seed) {
    for (double s : spec.sd)
        if (!(s > 0.0)) throw argument_error("prior standard deviations must be positive");
    Rng rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        EtaParams e;
        for (int j = 0; j < 5; ++j) e.eta[j] = spec.mean[j] + spec.sd[j] * rng.normal();
        try {
            const MixtureParams p = eta_to_theta(e);
            if (!theorem1_pole(p.lambda).empty()) continue;
            return e;
        } catch (const Error&) {
            continue;
        }
    }
    throw argument_error("prior sampling failed 100 times in a row");
}

std::uint64_t feature_schema_hash(const FeatureConfig& config) {
    // FNV-1a over a canonical rendering of the feature layout.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto fold = [&h](const char* data, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(data[i]);
            h *= 0x100000001b3ULL;
        }
    };
    auto fold_double = [&](double v) {
        char buf[40];
        const int n = std::snprintf(buf, sizeof buf, "%.17g|", v);
        fold(buf, static_cast<std::size_t>(n));
    };
    fold("stxm-features-v1|", 17);
    for (double e : config.grid.spatial_edges) fold_double(e);
    fold(";", 1);
    for (double e : config.grid.temporal_edges) fold_double(e);
    fold(";", 1);
    for (double t : config.taus) fold_double(t);
    fold(";", 1);
    fold_double(config.q0);
    fold_double(static_cast<double>(config.corr_min_pairs));
    fold_double(config.spline_penalty);
    return h;
}

std::vector<std::string> feature_names(const FeatureConfig& config) {
    std::vector<std::string> names;
    names.reserve(config.feature_length());
    char buf[64];
    for (double tau : config.taus)
        for (std::size_t si = 0; si < config.grid.n_spatial(); ++si)
            for (std::size_t ti = 0; ti < config.grid.n_temporal(); ++ti) {
                std::snprintf(buf, sizeof buf, "chi%g_s%zu_t%zu", tau, si, ti);
                names.emplace_back(buf);
            }
    for (std::size_t si = 0; si < config.grid.n_spatial(); ++si)
        for (std::size_t ti = 0; ti < config.grid.n_temporal(); ++ti) {
            std::snprintf(buf, sizeof buf, "corr_s%zu_t%zu", si, ti);
            names.emplace_back(buf);
        }
    return names;
}

std::vector<double> featurize(const Dataset& uniform, const PairTable& table,
                              const FeatureConfig& config,
                              const std::vector<std::uint32_t>& replicates) {
    const std::size_t nb = config.grid.n_bins();
    std::vector<double> out;
    out.reserve(config.feature_length());

    for (double tau : config.taus) {
        ChiSurface raw = empirical_chi(uniform, tau, table, config.grid, replicates);
        ChiSurface smooth = smooth_surface(raw, config.spline_penalty);
        out.insert(out.end(), smooth.smoothed.begin(), smooth.smoothed.end());
    }

    BinnedStat corr = conditional_exceedance_corr(uniform, config.q0, table, config.grid,
                                                  replicates, config.corr_min_pairs);
    bool any = false;
    for (std::size_t b = 0; b < nb; ++b) any = any || !corr.missing[b];
    if (!any) throw data_error("no bin has enough joint exceedances for the correlation feature");

    // Impute missing correlation bins from the nearest populated bin
    // (bin-center distance; ties resolved by flat index order).
    for (std::size_t si = 0; si < config.grid.n_spatial(); ++si)
        for (std::size_t ti = 0; ti < config.grid.n_temporal(); ++ti) {
            const std::size_t b = config.grid.flat(si, ti);
            if (!corr.missing[b]) {
                out.push_back(corr.values[b]);
                continue;
            }
            double best = std::numeric_limits<double>::infinity();
            std::size_t pick = nb;
            for (std::size_t sj = 0; sj < config.grid.n_spatial(); ++sj)
                for (std::size_t tj = 0; tj < config.grid.n_temporal(); ++tj) {
                    const std::size_t c = config.grid.flat(sj, tj);
                    if (corr.missing[c]) continue;
                    const double dx =
                        config.grid.spatial_center(si) - config.grid.spatial_center(sj);
                    const double dy =
                        config.grid.temporal_center(ti) - config.grid.temporal_center(tj);
                    const double dist = dx * dx + dy * dy;
                    if (dist < best) {
                        best = dist;
                        pick = c;
                    }
                }
            out.push_back(corr.values[pick]);
        }
    return out;
}

std::vector<double> featurize(const Dataset& uniform, const PairTable& table,
                              const FeatureConfig& config) {
    std::vector<std::uint32_t> reps(uniform.layout.n_replicates);
    for (std::size_t i = 0; i < reps.size(); ++i) reps[i] = static_cast<std::uint32_t>(i);
    return featurize(uniform, table, config, reps);
}

TrainingSet run_campaign(const PriorSpec& prior, const SpaceTimeLayout& layout, std::size_t S,
                         std::uint64_t seed, const FeatureConfig& config, int threads) {
    if (S < 100) throw argument_error("campaign needs at least 100 rows");
    layout.validate();
    const PairTable table(layout, config.grid);

    TrainingSet ts;
    ts.n_features = config.feature_length();
    ts.features.assign(S * ts.n_features, 0.0);
    for (auto& t : ts.targets) t.assign(S, 0.0);

    parallel_for(S, threads, [&](std::size_t row) {
        const std::uint64_t row_seed = derive_seed(seed, row);
        for (int attempt = 0;; ++attempt) {
            if (attempt >= 20)
                throw simulation_error("campaign row failed 20 simulation attempts");
            try {
                const EtaParams eta =
                    sample_prior(prior, derive_seed(row_seed, 2 * static_cast<std::uint64_t>(attempt)));
                const MixtureParams theta = eta_to_theta(eta);
                const Dataset x = simulate_mixture(
                    theta, layout, derive_seed(row_seed, 2 * static_cast<std::uint64_t>(attempt) + 1));
                const Dataset u = transform_to_uniform(x, theta);
                const std::vector<double> z = featurize(u, table, config);
                std::copy(z.begin(), z.end(), ts.features.begin() + row * ts.n_features);
                for (int j = 0; j < 5; ++j) ts.targets[static_cast<std::size_t>(j)][row] = eta.eta[j];
                return;
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::argument) throw;
                // data/simulation hiccup: log and retry with a fresh substream
                std::fprintf(stderr, "[stxm] campaign row %zu retry %d: %s\n", row, attempt,
                             e.what());
            }
        }
    });
    return ts;
}

void write_training_csv(const TrainingSet& ts, const FeatureConfig& config,
                        const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("cannot open " + path + " for writing");
    const std::vector<std::string> names = feature_names(config);
    for (const std::string& n : names) std::fprintf(f, "%s,", n.c_str());
    std::fprintf(f, "eta1,eta2,eta3,eta4,eta5\n");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        for (std::size_t j = 0; j < ts.n_features; ++j)
            std::fprintf(f, "%.17g,", ts.features[i * ts.n_features + j]);
        for (int j = 0; j < 5; ++j)
            std::fprintf(f, "%.17g%c", ts.targets[static_cast<std::size_t>(j)][i],
                         j == 4 ? '\n' : ',');
    }
    std::fclose(f);
}

SbiModel train_sbi(const TrainingSet& ts, const FeatureConfig& config, const PriorSpec& prior,
                   const ForestConfig& forest_config, int threads) {
    if (ts.size() < 100) throw argument_error("training needs at least 100 rows");
    if (ts.n_features != config.feature_length())
        throw model_error("training set and feature schema disagree");
    SbiModel model;
    model.features = config;
    model.schema_hash = feature_schema_hash(config);
    model.prior = prior;
    model.campaign_size = ts.size();
    for (int j = 0; j < 5; ++j) {
        ForestConfig fc = forest_config;
        fc.seed = derive_seed(forest_config.seed, static_cast<std::uint64_t>(j));
        model.forests[static_cast<std::size_t>(j)] =
            train_forest(ts.features, ts.n_features, ts.targets[static_cast<std::size_t>(j)], fc,
                         threads);
    }
    return model;
}

EtaParams predict_eta(const SbiModel& model, const std::vector<double>& features) {
    if (features.size() != model.features.feature_length())
        throw model_error("feature vector length does not match the model schema");
    EtaParams e;
    for (int j = 0; j < 5; ++j)
        e.eta[j] = model.forests[static_cast<std::size_t>(j)].predict(features.data());
    return e;
}

MixtureParams estimate(const SbiModel& model, const Dataset& uniform) {
    const PairTable table(uniform.layout, model.features.grid);
    return eta_to_theta(predict_eta(model, featurize(uniform, table, model.features)));
}

EstimateWithCI bootstrap_ci(const SbiModel& model, const Dataset& uniform, std::size_t B,
                            std::uint64_t seed, int threads) {
    const std::size_t n = uniform.layout.n_replicates;
    if (n < 20) throw data_error("bootstrap needs at least 20 replicates");
    if (B < 1) throw argument_error("bootstrap needs at least one resample");
    const PairTable table(uniform.layout, model.features.grid);

    EstimateWithCI out;
    out.n_bootstrap = B;
    out.eta = predict_eta(model, featurize(uniform, table, model.features));
    out.point = eta_to_theta(out.eta);

    std::vector<std::array<double, 6>> thetas(B);
    std::vector<std::uint8_t> vote(B);
    parallel_for(B, threads, [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        std::vector<std::uint32_t> reps(n);
        for (int attempt = 0;; ++attempt) {
            bool identical = true;
            for (std::size_t i = 0; i < n; ++i) {
                reps[i] = static_cast<std::uint32_t>(rng.uniform_index(n));
                identical = identical && reps[i] == reps[0];
            }
            if (!identical || attempt >= 50) break;  // degenerate resample: retry
        }
        const MixtureParams theta =
            eta_to_theta(predict_eta(model, featurize(uniform, table, model.features, reps)));
        thetas[b] = {theta.lambda[0], theta.lambda[1], theta.lambda[2],
                     theta.lambda[3], theta.rho_s,     theta.rho_t};
        vote[b] = static_cast<std::uint8_t>(theta.dominant_index());
    });

    for (std::size_t b = 0; b < B; ++b) ++out.vote_share[vote[b]];
    for (double& v : out.vote_share) v /= static_cast<double>(B);

    for (std::size_t c = 0; c < 6; ++c) {
        std::vector<double> v(B);
        for (std::size_t b = 0; b < B; ++b) v[b] = thetas[b][c];
        std::sort(v.begin(), v.end());
        out.lower[c] = empirical_quantile_sorted(v, 0.025);
        out.upper[c] = empirical_quantile_sorted(v, 0.975);
    }
    return out;
}

namespace {

// Binary model file: little-endian, fixed-width fields.
constexpr char kMagic[8] = {'S', 'T', 'X', 'M', 'R', 'F', '0', '1'};

void put_u64(std::FILE* f, std::uint64_t v) { std::fwrite(&v, sizeof v, 1, f); }
void put_i32(std::FILE* f, std::int32_t v) { std::fwrite(&v, sizeof v, 1, f); }
void put_f64(std::FILE* f, double v) { std::fwrite(&v, sizeof v, 1, f); }

std::uint64_t get_u64(std::FILE* f) {
    std::uint64_t v = 0;
    if (std::fread(&v, sizeof v, 1, f) != 1) throw io_error("model file truncated");
    return v;
}
std::int32_t get_i32(std::FILE* f) {
    std::int32_t v = 0;
    if (std::fread(&v, sizeof v, 1, f) != 1) throw io_error("model file truncated");
    return v;
}
double get_f64(std::FILE* f) {
    double v = 0;
    if (std::fread(&v, sizeof v, 1, f) != 1) throw io_error("model file truncated");
    return v;
}

void put_f64_vec(std::FILE* f, const std::vector<double>& v) {
    put_u64(f, v.size());
    for (double x : v) put_f64(f, x);
}
std::vector<double> get_f64_vec(std::FILE* f) {
    std::vector<double> v(get_u64(f));
    for (double& x : v) x = get_f64(f);
    return v;
}

}  // namespace

void save_model(const SbiModel& model, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("cannot open " + path + " for writing");
    std::fwrite(kMagic, 1, 8, f);
    put_u64(f, model.schema_hash);
    put_f64_vec(f, model.features.grid.spatial_edges);
    put_f64_vec(f, model.features.grid.temporal_edges);
    put_f64_vec(f, model.features.taus);
    put_f64(f, model.features.q0);
    put_u64(f, model.features.corr_min_pairs);
    put_f64(f, model.features.spline_penalty);
    for (int j = 0; j < 5; ++j) {
        put_f64(f, model.prior.mean[static_cast<std::size_t>(j)]);
        put_f64(f, model.prior.sd[static_cast<std::size_t>(j)]);
    }
    put_u64(f, model.campaign_size);
    put_u64(f, model.campaign_seed);
    for (const ForestModel& fm : model.forests) {
        put_u64(f, fm.n_features);
        put_i32(f, fm.config.n_trees);
        put_i32(f, fm.config.min_node_size);
        put_i32(f, fm.config.mtry);
        put_u64(f, fm.config.seed);
        put_f64(f, fm.target_min);
        put_f64(f, fm.target_max);
        put_f64(f, fm.oob_mse);
        put_f64(f, fm.oob_r2);
        put_u64(f, fm.trees.size());
        for (const Tree& t : fm.trees) {
            put_u64(f, t.nodes.size());
            for (const TreeNode& n : t.nodes) {
                put_i32(f, n.feature);
                put_f64(f, n.threshold);
                put_i32(f, n.left);
                put_i32(f, n.right);
                put_f64(f, n.value);
            }
        }
    }
    std::fclose(f);

    // JSON sidecar with the training metadata (deterministic content only).
    std::FILE* j = std::fopen((path + ".json").c_str(), "wb");
    if (!j) throw io_error("cannot open " + path + ".json for writing");
    std::fprintf(j, "{\n");
    std::fprintf(j, "  \"format\": \"STXMRF01\",\n");
    std::fprintf(j, "  \"schema_hash\": \"%016llx\",\n",
                 static_cast<unsigned long long>(model.schema_hash));
    std::fprintf(j, "  \"campaign_size\": %llu,\n",
                 static_cast<unsigned long long>(model.campaign_size));
    std::fprintf(j, "  \"campaign_seed\": %llu,\n",
                 static_cast<unsigned long long>(model.campaign_seed));
    std::fprintf(j, "  \"trees_per_forest\": %d,\n", model.forests[0].config.n_trees);
    std::fprintf(j, "  \"min_node_size\": %d,\n", model.forests[0].config.min_node_size);
    std::fprintf(j, "  \"mtry\": %d,\n", model.forests[0].config.mtry);
    std::fprintf(j, "  \"feature_length\": %zu,\n", model.features.feature_length());
    std::fprintf(j, "  \"oob_mse\": [");
    for (int k = 0; k < 5; ++k)
        std::fprintf(j, "%.17g%s", model.forests[static_cast<std::size_t>(k)].oob_mse,
                     k == 4 ? "" : ", ");
    std::fprintf(j, "],\n  \"oob_r2\": [");
    for (int k = 0; k < 5; ++k)
        std::fprintf(j, "%.17g%s", model.forests[static_cast<std::size_t>(k)].oob_r2,
                     k == 4 ? "" : ", ");
    std::fprintf(j, "]\n}\n");
    std::fclose(j);
}

SbiModel load_model(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("cannot open " + path);
    char magic[8];
    if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kMagic, 8) != 0) {
        std::fclose(f);
        throw model_error("not a model file (bad magic): " + path);
    }
    SbiModel model;
    try {
        model.schema_hash = get_u64(f);
        model.features.grid.spatial_edges = get_f64_vec(f);
        model.features.grid.temporal_edges = get_f64_vec(f);
        model.features.taus = get_f64_vec(f);
        model.features.q0 = get_f64(f);
        model.features.corr_min_pairs = get_u64(f);
        model.features.spline_penalty = get_f64(f);
        for (int j = 0; j < 5; ++j) {
            model.prior.mean[static_cast<std::size_t>(j)] = get_f64(f);
            model.prior.sd[static_cast<std::size_t>(j)] = get_f64(f);
        }
        model.campaign_size = get_u64(f);
        model.campaign_seed = get_u64(f);
        for (ForestModel& fm : model.forests) {
            fm.n_features = get_u64(f);
            fm.config.n_trees = get_i32(f);
            fm.config.min_node_size = get_i32(f);
            fm.config.mtry = get_i32(f);
            fm.config.seed = get_u64(f);
            fm.target_min = get_f64(f);
            fm.target_max = get_f64(f);
            fm.oob_mse = get_f64(f);
            fm.oob_r2 = get_f64(f);
            fm.trees.resize(get_u64(f));
            for (Tree& t : fm.trees) {
                t.nodes.resize(get_u64(f));
                for (TreeNode& n : t.nodes) {
                    n.feature = get_i32(f);
                    n.threshold = get_f64(f);
                    n.left = get_i32(f);
                    n.right = get_i32(f);
                    n.value = get_f64(f);
                }
            }
        }
    } catch (...) {
        std::fclose(f);
        throw;
    }
    std::fclose(f);
    if (model.schema_hash != feature_schema_hash(model.features))
        throw model_error("model schema hash does not match its feature configuration");
    return model;
}

}  // namespace stxm
