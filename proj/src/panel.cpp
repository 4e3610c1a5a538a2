#include "seatvc/panel.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace seatvc::panel {

bool ModelPanel::has_covariate(const std::string& name) const {
    return std::find(covariate_names.begin(), covariate_names.end(), name) != covariate_names.end();
}

Eigen::Index ModelPanel::column_of(const std::string& name) const {
    auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) throw InvalidInput("unknown covariate '" + name + "'");
    return static_cast<Eigen::Index>(it - covariate_names.begin());
}

ScalingRecord ModelPanel::scaling_of(const std::string& name) const {
    auto it = scaling.find(name);
    return it == scaling.end() ? ScalingRecord{} : it->second;
}

void ModelPanel::validate() const {
    const Eigen::Index n = rows();
    if (n == 0) throw InvalidInput("panel has no rows");
    if (static_cast<Eigen::Index>(covariate_names.size()) != covariate_count())
        throw InvalidInput("covariate name count does not match covariate columns");
    if (static_cast<Eigen::Index>(subject_ids.size()) != n ||
        static_cast<Eigen::Index>(times.size()) != n || response.size() != n)
        throw InvalidInput("panel row arrays have mismatched lengths");

    std::unordered_set<std::string> names(covariate_names.begin(), covariate_names.end());
    if (static_cast<Eigen::Index>(names.size()) != covariate_count())
        throw InvalidInput("duplicate covariate name in panel");

    if (!covariates.allFinite() || !response.allFinite())
        throw InvalidInput("panel contains non-finite values");

    std::unordered_set<std::string> closed_subjects;
    const std::string* current = nullptr;
    for (Eigen::Index i = 0; i < n; ++i) {
        double t = times[static_cast<std::size_t>(i)];
        if (!(t >= 0.0 && t <= 1.0))
            throw InvalidInput("row " + std::to_string(i) + ": time " + std::to_string(t) +
                               " outside [0,1]");
        const std::string& subject = subject_ids[static_cast<std::size_t>(i)];
        if (current == nullptr || subject != *current) {
            if (closed_subjects.count(subject))
                throw InvalidInput("rows for subject '" + subject + "' are not contiguous");
            if (current != nullptr) closed_subjects.insert(*current);
            current = &subject;
        } else if (t <= times[static_cast<std::size_t>(i - 1)]) {
            throw InvalidInput("subject '" + subject + "': times not strictly increasing at row " +
                               std::to_string(i));
        }
    }
}

ModelPanel standardize(const ModelPanel& input, std::span<const std::string> covariate_names) {
    ModelPanel out = input;
    const double n = static_cast<double>(input.rows());
    if (input.rows() < 2) throw InvalidInput("standardize needs at least two rows");

    for (const auto& name : covariate_names) {
        Eigen::Index col = input.column_of(name);
        double mean = out.covariates.col(col).mean();
        double sq = (out.covariates.col(col).array() - mean).square().sum();
        double sd = std::sqrt(sq / (n - 1.0));
        if (!(sd > 0.0))
            throw InvalidInput("covariate '" + name + "' has zero variance; cannot standardize");
        out.covariates.col(col) = (out.covariates.col(col).array() - mean) / sd;
        out.scaling[name] = input.scaling_of(name).then({mean, sd});
    }
    return out;
}

}  // namespace seatvc::panel
