#include "cefr/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cefr/error.hpp"

namespace cefr {

namespace {

Error schema_error(const std::string& what) { return Error(ErrorKind::schema, "dataset", what); }

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

bool parse_double(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    const char* first = cell.data();
    const char* last = first + cell.size();
    if (*first == '+') ++first;
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last;
}

void require_column(const ColumnFrame& frame, const std::optional<std::string>& name,
                    const char* role) {
    if (name && !frame.has(*name))
        throw schema_error("column '" + *name + "' mapped as " + role + " not found");
}

}  // namespace

void ColumnFrame::add_column(const std::string& name, std::vector<double> values) {
    if (index_.count(name)) throw Error(ErrorKind::schema, "dataset", "duplicate column '" + name + "'");
    if (!names_.empty() && values.size() != n_rows_)
        throw Error(ErrorKind::validation, "dataset",
                    "column '" + name + "' has " + std::to_string(values.size()) +
                        " rows, expected " + std::to_string(n_rows_));
    if (names_.empty()) n_rows_ = values.size();
    index_[name] = data_.size();
    names_.push_back(name);
    data_.push_back(std::move(values));
}

void ColumnFrame::replace_column(const std::string& name, std::vector<double> values) {
    auto it = index_.find(name);
    if (it == index_.end()) {
        add_column(name, std::move(values));
        return;
    }
    if (values.size() != n_rows_)
        throw Error(ErrorKind::validation, "dataset", "column '" + name + "' length mismatch");
    data_[it->second] = std::move(values);
}

const std::vector<double>& ColumnFrame::column(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw schema_error("unknown column '" + name + "'");
    return data_[it->second];
}

ColumnFrame ColumnFrame::take_rows(const std::vector<std::size_t>& rows) const {
    ColumnFrame out;
    for (std::size_t c = 0; c < names_.size(); ++c) {
        std::vector<double> v(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) v[i] = data_[c].at(rows[i]);
        out.add_column(names_[c], std::move(v));
    }
    return out;
}

ColumnFrame parse_csv(const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::string> header;
    std::vector<std::vector<double>> cols;
    std::size_t row = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto fields = split_fields(t);
        if (header.empty()) {
            header = fields;
            for (const auto& h : header)
                if (h.empty()) throw Error(ErrorKind::parse, "dataset", source + ": empty column name in header");
            cols.resize(header.size());
            continue;
        }
        ++row;
        if (fields.size() != header.size())
            throw Error(ErrorKind::parse, "dataset",
                        source + ": row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(header.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v;
            if (!parse_double(fields[c], v))
                throw Error(ErrorKind::parse, "dataset",
                            source + ": row " + std::to_string(row) + ", column '" + header[c] +
                                "': non-numeric value '" + fields[c] + "'");
            cols[c].push_back(v);
        }
    }
    if (header.empty()) throw Error(ErrorKind::parse, "dataset", source + ": missing header row");
    if (row == 0) throw Error(ErrorKind::validation, "dataset", source + ": no data rows");
    ColumnFrame frame;
    for (std::size_t c = 0; c < header.size(); ++c) frame.add_column(header[c], std::move(cols[c]));
    return frame;
}

ColumnFrame load_csv(const std::string& path, const ColumnMapping& mapping, const LoadOptions& opts) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::input, "dataset", "cannot open '" + path + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    ColumnFrame frame = parse_csv(buf.str(), path);
    validate_mapping(frame, mapping, opts);
    return frame;
}

void write_csv(const std::string& path, const ColumnFrame& frame) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::input, "dataset", "cannot write '" + path + "'");
    const auto& names = frame.names();
    for (std::size_t c = 0; c < names.size(); ++c) f << (c ? "," : "") << names[c];
    f << '\n';
    char buf[40];
    for (std::size_t i = 0; i < frame.n_rows(); ++i) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", frame.column(names[c])[i]);
            f << (c ? "," : "") << buf;
        }
        f << '\n';
    }
}

void validate_mapping(ColumnFrame& frame, const ColumnMapping& mapping, const LoadOptions& opts) {
    require_column(frame, mapping.outcome, "outcome");
    require_column(frame, mapping.treatment, "treatment");
    require_column(frame, mapping.instrument, "instrument");
    require_column(frame, mapping.time, "time");
    require_column(frame, mapping.dataset_indicator, "dataset_indicator");
    for (const auto& c : mapping.covariates)
        if (!frame.has(c)) throw schema_error("covariate column '" + c + "' not found");
    for (const auto& c : mapping.target_covariates) {
        if (!frame.has(c)) throw schema_error("target covariate column '" + c + "' not found");
        bool listed = false;
        for (const auto& x : mapping.covariates) listed = listed || x == c;
        if (!listed) throw schema_error("target covariate '" + c + "' is not among the covariates");
    }

    for (const auto& name : frame.names()) {
        const auto& col = frame.column(name);
        for (std::size_t i = 0; i < col.size(); ++i)
            if (!std::isfinite(col[i]))
                throw Error(ErrorKind::validation, "dataset",
                            "column '" + name + "' row " + std::to_string(i + 1) + " is not finite");
    }

    auto check_binary = [&](const std::optional<std::string>& name, const char* role) {
        if (!name) return;
        std::vector<double> col = frame.column(*name);
        for (std::size_t i = 0; i < col.size(); ++i) {
            if (std::abs(col[i]) <= 1e-12)
                col[i] = 0.0;
            else if (std::abs(col[i] - 1.0) <= 1e-12)
                col[i] = 1.0;
            else
                throw Error(ErrorKind::validation, "dataset",
                            "column '" + *name + "' (" + role + ") row " + std::to_string(i + 1) +
                                " is not 0/1");
        }
        frame.replace_column(*name, std::move(col));
    };
    if (opts.treatment_is_binary) check_binary(mapping.treatment, "treatment");
    check_binary(mapping.instrument, "instrument");
    check_binary(mapping.time, "time");
    check_binary(mapping.dataset_indicator, "dataset_indicator");
}

Eigen::MatrixXd subvector(const ColumnFrame& frame, const std::vector<std::string>& names) {
    Eigen::MatrixXd m(frame.n_rows(), names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        const auto& col = frame.column(names[j]);
        for (std::size_t i = 0; i < col.size(); ++i) m(i, j) = col[i];
    }
    return m;
}

}  // namespace cefr
