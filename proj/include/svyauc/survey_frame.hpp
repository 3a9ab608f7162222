#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "svyauc/error.hpp"

namespace svyauc {

/// One sampled unit. Stratum and PSU labels are opaque; the PSU label only has to be unique
/// within its stratum.
struct UnitRecord {
    std::string id;
    std::string stratum;
    std::string psu;
    double weight = 1.0;
    int outcome = 0;
    std::vector<double> covariates;
};

struct StratumInfo {
    std::string label;
    std::vector<std::size_t> psus; // indices into SurveyFrame::psus()
};

struct PsuInfo {
    std::string label;
    std::size_t stratum = 0;
    std::vector<std::size_t> units; // unit positions, ascending
};

/// Immutable columnar survey sample. Unit position is identity: every weight vector derived from a
/// frame indexes units in this order. Strata and PSUs are densely re-indexed in order of first
/// appearance.
class SurveyFrame {
public:
    SurveyFrame() = default;

    SurveyFrame(std::vector<std::string> covariate_names, const std::vector<UnitRecord>& units)
        : covariate_names_(std::move(covariate_names)) {
        const std::size_t q = covariate_names_.size();
        ids_.reserve(units.size());
        weights_.reserve(units.size());
        outcomes_.reserve(units.size());
        covariates_.reserve(units.size() * q);
        unit_psu_.reserve(units.size());

        std::unordered_map<std::string, std::size_t> stratum_index;
        std::vector<std::unordered_map<std::string, std::size_t>> psu_index;

        for (std::size_t i = 0; i < units.size(); ++i) {
            const UnitRecord& u = units[i];
            const std::size_t row = i + 1;
            if (!std::isfinite(u.weight)) throw NonFiniteValueError("weight", row);
            if (!(u.weight > 0.0)) throw NonPositiveWeightError(row);
            if (u.outcome != 0 && u.outcome != 1) throw InvalidOutcomeError(row);
            if (u.covariates.size() != q) throw RaggedRowError(row, q, u.covariates.size());
            for (double x : u.covariates) {
                if (!std::isfinite(x)) throw NonFiniteValueError("covariate", row);
            }

            auto [sit, new_stratum] = stratum_index.try_emplace(u.stratum, strata_.size());
            if (new_stratum) {
                strata_.push_back(StratumInfo{u.stratum, {}});
                psu_index.emplace_back();
            }
            const std::size_t h = sit->second;
            auto [pit, new_psu] = psu_index[h].try_emplace(u.psu, psus_.size());
            if (new_psu) {
                psus_.push_back(PsuInfo{u.psu, h, {}});
                strata_[h].psus.push_back(psus_.size() - 1);
            }
            const std::size_t j = pit->second;
            psus_[j].units.push_back(i);

            ids_.push_back(u.id);
            weights_.push_back(u.weight);
            outcomes_.push_back(static_cast<std::uint8_t>(u.outcome));
            covariates_.insert(covariates_.end(), u.covariates.begin(), u.covariates.end());
            unit_psu_.push_back(j);
        }
    }

    std::size_t n() const noexcept { return weights_.size(); }
    std::size_t q() const noexcept { return covariate_names_.size(); }

    const std::vector<std::string>& covariate_names() const noexcept { return covariate_names_; }
    std::optional<std::size_t> covariate_index(std::string_view name) const {
        for (std::size_t j = 0; j < covariate_names_.size(); ++j) {
            if (covariate_names_[j] == name) return j;
        }
        return std::nullopt;
    }

    std::span<const double> weights() const noexcept { return weights_; }
    std::span<const std::uint8_t> outcomes() const noexcept { return outcomes_; }
    double weight(std::size_t i) const { return weights_[i]; }
    int outcome(std::size_t i) const { return outcomes_[i]; }
    const std::string& unit_id(std::size_t i) const { return ids_[i]; }

    std::span<const double> covariates(std::size_t i) const {
        return std::span<const double>(covariates_).subspan(i * q(), q());
    }
    double covariate(std::size_t i, std::size_t j) const { return covariates_[i * q() + j]; }

    const std::vector<StratumInfo>& strata() const noexcept { return strata_; }
    const std::vector<PsuInfo>& psus() const noexcept { return psus_; }
    std::size_t psu_of(std::size_t i) const { return unit_psu_[i]; }
    std::size_t stratum_of(std::size_t i) const { return psus_[unit_psu_[i]].stratum; }

    std::size_t event_count() const {
        std::size_t c = 0;
        for (auto y : outcomes_) c += y;
        return c;
    }

    /// Same design and data with a replacement weight vector (all entries must be > 0).
    SurveyFrame with_weights(std::span<const double> weights) const {
        if (weights.size() != n()) throw DimensionMismatchError("weight vector length");
        SurveyFrame copy = *this;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (!std::isfinite(weights[i])) throw NonFiniteValueError("weight", i + 1);
            if (!(weights[i] > 0.0)) throw NonPositiveWeightError(i + 1);
        }
        copy.weights_.assign(weights.begin(), weights.end());
        return copy;
    }

    UnitRecord record(std::size_t i) const {
        const auto x = covariates(i);
        return UnitRecord{ids_[i], strata_[stratum_of(i)].label, psus_[psu_of(i)].label, weights_[i],
                          outcomes_[i], std::vector<double>(x.begin(), x.end())};
    }

private:
    std::vector<std::string> covariate_names_;
    std::vector<std::string> ids_;
    std::vector<double> weights_;
    std::vector<std::uint8_t> outcomes_;
    std::vector<double> covariates_; // row-major n x q
    std::vector<std::size_t> unit_psu_;
    std::vector<StratumInfo> strata_;
    std::vector<PsuInfo> psus_;
};

struct DesignSummary {
    std::size_t strata = 0;                           // H
    std::size_t total_psus = 0;                       // a = sum of a_h
    std::vector<std::size_t> psus_per_stratum;        // a_h
    std::vector<std::vector<std::size_t>> psu_sizes;  // units per PSU, per stratum
};

inline DesignSummary design_summary(const SurveyFrame& frame) {
    DesignSummary s;
    s.strata = frame.strata().size();
    for (const auto& stratum : frame.strata()) {
        s.psus_per_stratum.push_back(stratum.psus.size());
        s.total_psus += stratum.psus.size();
        std::vector<std::size_t> sizes;
        for (std::size_t j : stratum.psus) sizes.push_back(frame.psus()[j].units.size());
        s.psu_sizes.push_back(std::move(sizes));
    }
    return s;
}

/// Design summary for replicate-weight methods; every stratum needs at least two PSUs.
inline DesignSummary validate_for_replication(const SurveyFrame& frame) {
    std::string offending;
    for (const auto& stratum : frame.strata()) {
        if (stratum.psus.size() < 2) {
            if (!offending.empty()) offending += ", ";
            offending += stratum.label;
        }
    }
    if (!offending.empty()) throw SingletonPsuError(offending);
    return design_summary(frame);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Column mapping for CSV ingestion. An empty id column means units are numbered by row.
struct CsvSchema {
    std::string stratum_col = "stratum";
    std::string psu_col = "psu";
    std::string weight_col = "weight";
    std::string outcome_col = "outcome";
    std::vector<std::string> covariate_cols;
    std::string id_col;
};

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

inline std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace detail

/// Reads a header-first CSV; row order is preserved and rows are numbered from 1 (first data row).
inline SurveyFrame read_survey_csv(std::istream& in, const CsvSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty CSV input");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF) {
        line.erase(0, 3);
    }
    const auto header = detail::split_csv_line(line);
    std::unordered_map<std::string, std::size_t> column;
    for (std::size_t c = 0; c < header.size(); ++c) column.emplace(std::string(detail::trim(header[c])), c);

    auto locate = [&](const std::string& name) {
        auto it = column.find(name);
        if (it == column.end()) throw MissingColumnError(name);
        return it->second;
    };
    const std::size_t stratum_c = locate(schema.stratum_col);
    const std::size_t psu_c = locate(schema.psu_col);
    const std::size_t weight_c = locate(schema.weight_col);
    const std::size_t outcome_c = locate(schema.outcome_col);
    std::optional<std::size_t> id_c;
    if (!schema.id_col.empty()) id_c = locate(schema.id_col);
    std::vector<std::size_t> cov_c;
    for (const auto& name : schema.covariate_cols) cov_c.push_back(locate(name));

    std::vector<UnitRecord> units;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size()) throw RaggedRowError(row, header.size(), fields.size());

        UnitRecord u;
        u.id = id_c ? std::string(detail::trim(fields[*id_c])) : std::to_string(row);
        u.stratum = std::string(detail::trim(fields[stratum_c]));
        u.psu = std::string(detail::trim(fields[psu_c]));

        const auto w = detail::parse_double(fields[weight_c]);
        if (!w) throw NonNumericValueError("weight", row);
        if (!std::isfinite(*w)) throw NonFiniteValueError("weight", row);
        if (!(*w > 0.0)) throw NonPositiveWeightError(row);
        u.weight = *w;

        const auto y = detail::parse_double(fields[outcome_c]);
        if (!y || (*y != 0.0 && *y != 1.0)) throw InvalidOutcomeError(row);
        u.outcome = static_cast<int>(*y);

        for (std::size_t k = 0; k < cov_c.size(); ++k) {
            const auto x = detail::parse_double(fields[cov_c[k]]);
            if (!x) throw NonNumericValueError(schema.covariate_cols[k], row);
            if (!std::isfinite(*x)) throw NonFiniteValueError(schema.covariate_cols[k], row);
            u.covariates.push_back(*x);
        }
        units.push_back(std::move(u));
    }
    return SurveyFrame(schema.covariate_cols, units);
}

inline SurveyFrame load_survey_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_survey_csv(in, schema);
}

/// Writes id,stratum,psu,weight,outcome,<covariates> with 17 significant digits, which reloads
/// bit-exactly.
inline void write_survey_csv(const SurveyFrame& frame, std::ostream& out) {
    out << "id,stratum,psu,weight,outcome";
    for (const auto& name : frame.covariate_names()) out << ',' << detail::quote_csv(name);
    out << '\n';
    for (std::size_t i = 0; i < frame.n(); ++i) {
        out << detail::quote_csv(frame.unit_id(i)) << ','
            << detail::quote_csv(frame.strata()[frame.stratum_of(i)].label) << ','
            << detail::quote_csv(frame.psus()[frame.psu_of(i)].label) << ','
            << detail::format_double(frame.weight(i)) << ',' << frame.outcome(i);
        for (double x : frame.covariates(i)) out << ',' << detail::format_double(x);
        out << '\n';
    }
}

inline CsvSchema written_schema(const SurveyFrame& frame) {
    CsvSchema schema;
    schema.covariate_cols = frame.covariate_names();
    schema.id_col = "id";
    return schema;
}

} // namespace svyauc
