#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cefr {

// Named numeric columns of equal length. Column order is kept for output.
class ColumnFrame {
public:
    ColumnFrame() = default;

    void add_column(const std::string& name, std::vector<double> values);
    void replace_column(const std::string& name, std::vector<double> values);
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    const std::vector<double>& column(const std::string& name) const;
    const std::vector<std::string>& names() const { return names_; }
    std::size_t n_rows() const { return n_rows_; }

    ColumnFrame take_rows(const std::vector<std::size_t>& rows) const;

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> data_;
    std::map<std::string, std::size_t> index_;
    std::size_t n_rows_ = 0;
};

struct ColumnMapping {
    std::optional<std::string> outcome;
    std::optional<std::string> treatment;
    std::optional<std::string> instrument;
    std::optional<std::string> time;
    std::optional<std::string> dataset_indicator;
    std::vector<std::string> covariates;
    std::vector<std::string> target_covariates;
};

struct LoadOptions {
    // RAW signals map a real-valued column to `treatment`.
    bool treatment_is_binary = true;
};

ColumnFrame load_csv(const std::string& path, const ColumnMapping& mapping,
                     const LoadOptions& opts = {});

// Parses CSV text; `source` is used in error messages.
ColumnFrame parse_csv(const std::string& text, const std::string& source = "<memory>");

void write_csv(const std::string& path, const ColumnFrame& frame);

// Checks mapped columns exist, are finite, and binary roles are {0,1}.
// Binary values within 1e-12 of 0 or 1 are snapped in place.
void validate_mapping(ColumnFrame& frame, const ColumnMapping& mapping,
                      const LoadOptions& opts = {});

Eigen::MatrixXd subvector(const ColumnFrame& frame, const std::vector<std::string>& names);

}  // namespace cefr
