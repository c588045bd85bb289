#pragma once

// Text formats: CSV data/covariance/support files, JSON structure files and
// JSON result documents. Indices are 0-based everywhere.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>

#include "certprec/cutplane.hpp"
#include "certprec/model.hpp"
#include "certprec/structure.hpp"
#include "certprec/support.hpp"

namespace certprec {

/// Shortest text that parses back to exactly `v` ("inf", "-inf", "nan" for
/// non-finite values).
std::string format_double(double v);

/// Numeric CSV. A first line that does not parse as numbers is taken as a
/// header. Ragged rows throw kInvalidInput naming the 1-based line.
DataMatrix read_csv(std::istream& in, std::string_view source = "input");
DataMatrix read_csv_file(const std::filesystem::path& path);

/// p x p covariance CSV, symmetric within 1e-8, symmetrized by averaging.
SymmetricMatrix covariance_from_table(const DataMatrix& table, std::string_view source = "input");

/// Two integer columns (i, j) per row.
Support support_from_table(const DataMatrix& table, std::size_t p,
                           std::string_view source = "input");

/// JSON object with optional keys known_zero, known_one ([[i, j], ...]),
/// degree_lower, degree_upper (arrays of length p), average_degree
/// {target, slack} and hubs {d_low, d_high, max_hubs}.
Constraints parse_structure(std::string_view json_text, std::size_t p);
Constraints read_structure_file(const std::filesystem::path& path, std::size_t p);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// {p, k, regularizer, status, objective_upper, objective_lower, relative_gap,
///  support, theta: {diagonal, entries}, cuts, cut_pool, nodes, time_s,
///  time_master_s, time_subproblem_s}
std::string result_to_json(const SolveResult& res, const Regularizer& reg);

/// Rebuilds Theta from the "theta" member of a result document.
SymmetricMatrix theta_from_json(std::string_view json_text);

}  // namespace certprec
