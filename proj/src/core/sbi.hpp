#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "forest.hpp"
#include "mixture.hpp"
#include "taildep.hpp"

namespace stxm {

/// Independent normal priors on the unbounded parameters eta_1..eta_5.
struct PriorSpec {
    std::array<double, 5> mean{0.0, 0.0, 0.0, std::log(0.3), std::log(0.3)};
    std::array<double, 5> sd{1.0, 1.0, 1.0, 0.7, 0.7};
};

/// Draws eta from the prior, resampling (up to 100 attempts) any draw whose
/// weights hit the distinctness gate or a closed-form coefficient pole.
EtaParams sample_prior(const PriorSpec& spec, std::uint64_t seed);

/// Summary-statistic layout: smoothed chi surfaces at each tau, then
/// conditional exceedance correlations, all in spatial-major bin order.
struct FeatureConfig {
    PairBinGrid grid;
    std::vector<double> taus{0.5, 0.9};
    double q0 = 0.5;
    std::size_t corr_min_pairs = 30;
    double spline_penalty = 1.0;

    std::size_t feature_length() const { return (taus.size() + 1) * grid.n_bins(); }
};

std::uint64_t feature_schema_hash(const FeatureConfig& config);
std::vector<std::string> feature_names(const FeatureConfig& config);

std::vector<double> featurize(const Dataset& uniform, const PairTable& table,
                              const FeatureConfig& config);
std::vector<double> featurize(const Dataset& uniform, const PairTable& table,
                              const FeatureConfig& config,
                              const std::vector<std::uint32_t>& replicates);

/// Rows of (feature vector, eta targets) from a prior-predictive campaign.
struct TrainingSet {
    std::size_t n_features = 0;
    std::vector<double> features;              // S x n_features, row-major
    std::array<std::vector<double>, 5> targets;

    std::size_t size() const { return targets[0].size(); }
};

/// S rows of (prior draw -> simulate -> exact-H uniformization ->
/// featurize); parallel over rows, bit-identical for any thread count.
TrainingSet run_campaign(const PriorSpec& prior, const SpaceTimeLayout& layout, std::size_t S,
                         std::uint64_t seed, const FeatureConfig& config, int threads = 1);

void write_training_csv(const TrainingSet& ts, const FeatureConfig& config,
                        const std::string& path);

/// One forest per eta component plus everything needed to reproduce and
/// validate the features at prediction time.
struct SbiModel {
    std::array<ForestModel, 5> forests;
    FeatureConfig features;
    std::uint64_t schema_hash = 0;
    PriorSpec prior;
    std::uint64_t campaign_size = 0;
    std::uint64_t campaign_seed = 0;
};

SbiModel train_sbi(const TrainingSet& ts, const FeatureConfig& config, const PriorSpec& prior,
                   const ForestConfig& forest_config, int threads = 1);

/// Versioned binary + JSON metadata sidecar (written to path + ".json").
void save_model(const SbiModel& model, const std::string& path);
SbiModel load_model(const std::string& path);

EtaParams predict_eta(const SbiModel& model, const std::vector<double>& features);

/// featurize -> per-parameter forests -> inverse transform.
MixtureParams estimate(const SbiModel& model, const Dataset& uniform);

struct EstimateWithCI {
    MixtureParams point;
    EtaParams eta;
    // Component order: lambda1..lambda4, rho_S, rho_T.
    std::array<double, 6> lower{};
    std::array<double, 6> upper{};
    std::array<double, 4> vote_share{};  // fraction of resamples with each weight largest
    std::size_t n_bootstrap = 0;
};

/// Nonparametric bootstrap over replicates (years): resample with
/// replacement, re-featurize, re-predict, map to theta, then take 2.5/97.5
/// percentile intervals of the resampled theta components.
EstimateWithCI bootstrap_ci(const SbiModel& model, const Dataset& uniform, std::size_t B,
                            std::uint64_t seed, int threads = 1);

}  // namespace stxm
