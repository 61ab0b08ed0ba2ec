#pragma once

#include "fpimpute/common.hpp"
#include "fpimpute/config.hpp"
#include "fpimpute/dataset.hpp"
#include "fpimpute/generative_imputer.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace fpimpute {

// Common surface of every imputation method. The public calls replace every
// masked cell with NaN before the method sees the data, so an implementation
// can never read the value hidden behind the mask.
class Imputer {
public:
    virtual ~Imputer() = default;

    virtual std::string name() const = 0;

    void fit(const Matrix& data, const MissingMatrix& missing);
    Matrix transform(const Matrix& data, const MissingMatrix& missing) const;
    // Imputation of the training rows themselves.
    Matrix fit_transform(const Matrix& data, const MissingMatrix& missing);

    // Number of cells that had to fall back to a feature mean (KNN only).
    virtual std::size_t fallback_count() const { return 0; }
    // The fitted network of the generative method, null for every other method.
    virtual const GenerativeImputer* generative_model() const { return nullptr; }
    virtual const FillStatistics* fill_statistics() const { return nullptr; }

protected:
    virtual void do_fit(const Matrix& hidden, const MissingMatrix& missing) = 0;
    virtual Matrix do_transform(const Matrix& hidden, const MissingMatrix& missing) const = 0;
    virtual Matrix do_fit_transform(const Matrix& hidden, const MissingMatrix& missing);
};

// Registered method names, in report order.
const std::vector<std::string>& imputer_names();
bool is_registered_imputer(const std::string& name);

// Builds a method by name. Hyperparameters are read from `config`:
// `generative.*` for the generative imputer and `baselines.<name>.*` for the
// others. `schema` selects Bernoulli heads for binary features.
std::unique_ptr<Imputer> make_imputer(const std::string& name, const Config& config, std::uint64_t seed,
                                      const std::vector<FeatureSchema>& schema = {});

ModelShape model_shape_from(const Config& generative_section);
FitConfig fit_config_from(const Config& generative_section);
InferenceOptions inference_options_from(const Config& generative_section, const FitConfig& fit);

// Wraps an already fitted generative model (e.g. read from a checkpoint).
std::unique_ptr<Imputer> restore_generative_imputer(GenerativeImputer model, FillStatistics stats,
                                                    const Config& config, std::uint64_t seed);

}  // namespace fpimpute
