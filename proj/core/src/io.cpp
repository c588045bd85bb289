#include "certprec/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "certprec/error.hpp"

namespace certprec {
namespace {

using nlohmann::json;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_number(std::string_view field, double& out) {
  field = trim(field);
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string where(std::string_view source, std::size_t line) {
  return std::string(source) + ": line " + std::to_string(line);
}

std::vector<Pair> pair_list(const json& j, std::size_t p, const char* key) {
  if (!j.is_array()) fail(ErrorKind::kInvalidInput, std::string(key) + " must be an array of pairs");
  std::vector<Pair> out;
  for (const json& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned()) {
      fail(ErrorKind::kInvalidInput, std::string(key) + " entries must be [i, j] with i, j >= 0");
    }
    const auto a = e[0].get<std::size_t>(), b = e[1].get<std::size_t>();
    if (a == b || a >= p || b >= p) {
      fail(ErrorKind::kInvalidInput, std::string(key) + ": invalid pair [" + std::to_string(a) +
                                         ", " + std::to_string(b) + "]");
    }
    out.push_back(make_pair_sorted(a, b));
  }
  return out;
}

std::vector<std::size_t> count_list(const json& j, const char* key) {
  if (!j.is_array()) fail(ErrorKind::kInvalidInput, std::string(key) + " must be an array");
  std::vector<std::size_t> out;
  for (const json& e : j) {
    if (!e.is_number_unsigned()) {
      fail(ErrorKind::kInvalidInput, std::string(key) + " entries must be nonnegative integers");
    }
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

std::size_t count_field(const json& obj, const char* key, const char* parent) {
  if (!obj.contains(key) || !obj[key].is_number_unsigned()) {
    fail(ErrorKind::kInvalidInput,
         std::string(parent) + "." + key + " must be a nonnegative integer");
  }
  return obj[key].get<std::size_t>();
}

json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

DataMatrix read_csv(std::istream& in, std::string_view source) {
  DataMatrix m;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_number(fields[c], row[c])) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      fail(ErrorKind::kInvalidInput, where(source, line_no) + " has a non-numeric field");
    }
    first = false;
    if (m.cols == 0) {
      m.cols = row.size();
    } else if (row.size() != m.cols) {
      fail(ErrorKind::kInvalidInput, where(source, line_no) + " has " +
                                         std::to_string(row.size()) + " fields, expected " +
                                         std::to_string(m.cols));
    }
    for (double v : row) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::kInvalidInput, where(source, line_no) + " has a non-finite value");
      }
    }
    m.values.insert(m.values.end(), row.begin(), row.end());
    ++m.rows;
  }
  if (m.rows == 0) fail(ErrorKind::kInvalidInput, std::string(source) + ": no data rows");
  return m;
}

DataMatrix read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kInvalidInput, "cannot open " + path.string());
  return read_csv(in, path.string());
}

SymmetricMatrix covariance_from_table(const DataMatrix& table, std::string_view source) {
  if (table.rows != table.cols) {
    fail(ErrorKind::kInvalidInput, std::string(source) + ": covariance must be square, got " +
                                       std::to_string(table.rows) + "x" +
                                       std::to_string(table.cols));
  }
  try {
    return SymmetricMatrix::from_dense(table.rows, table.values, 1e-8);
  } catch (const Error& e) {
    fail(ErrorKind::kInvalidInput, std::string(source) + ": " + e.what());
  }
}

Support support_from_table(const DataMatrix& table, std::size_t p, std::string_view source) {
  if (table.cols != 2) fail(ErrorKind::kInvalidInput, std::string(source) + ": support needs 2 columns");
  std::vector<Pair> pairs;
  for (std::size_t r = 0; r < table.rows; ++r) {
    const double a = table(r, 0), b = table(r, 1);
    if (a < 0 || b < 0 || a != std::floor(a) || b != std::floor(b) || a >= static_cast<double>(p) ||
        b >= static_cast<double>(p) || a == b) {
      fail(ErrorKind::kInvalidInput, std::string(source) + ": invalid pair in row " +
                                         std::to_string(r + 1));
    }
    pairs.push_back(make_pair_sorted(static_cast<std::size_t>(a), static_cast<std::size_t>(b)));
  }
  return Support(p, std::move(pairs));
}

Constraints parse_structure(std::string_view json_text, std::size_t p) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("structure file: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::kInvalidInput, "structure file must hold a JSON object");
  static const char* known[] = {"known_zero", "known_one", "degree_lower", "degree_upper",
                                "average_degree", "hubs"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      fail(ErrorKind::kInvalidInput, "structure file: unknown key '" + key + "'");
    }
  }
  Constraints cs;
  if (j.contains("known_zero")) cs.push_back(KnownZero{pair_list(j["known_zero"], p, "known_zero")});
  if (j.contains("known_one")) cs.push_back(KnownOne{pair_list(j["known_one"], p, "known_one")});
  if (j.contains("degree_lower") || j.contains("degree_upper")) {
    DegreeBounds d;
    d.lower = j.contains("degree_lower") ? count_list(j["degree_lower"], "degree_lower")
                                         : std::vector<std::size_t>(p, 0);
    d.upper = j.contains("degree_upper") ? count_list(j["degree_upper"], "degree_upper")
                                         : std::vector<std::size_t>(p, p > 0 ? p - 1 : 0);
    cs.push_back(std::move(d));
  }
  if (j.contains("average_degree")) {
    const json& a = j["average_degree"];
    if (!a.is_object() || !a.contains("target") || !a["target"].is_number()) {
      fail(ErrorKind::kInvalidInput, "average_degree needs a numeric target");
    }
    AverageDegree ad;
    ad.target = a["target"].get<double>();
    if (a.contains("slack")) {
      if (!a["slack"].is_number()) fail(ErrorKind::kInvalidInput, "average_degree.slack must be numeric");
      ad.slack = a["slack"].get<double>();
    }
    cs.push_back(ad);
  }
  if (j.contains("hubs")) {
    const json& h = j["hubs"];
    if (!h.is_object()) fail(ErrorKind::kInvalidInput, "hubs must be an object");
    cs.push_back(Hubs{count_field(h, "d_low", "hubs"), count_field(h, "d_high", "hubs"),
                      count_field(h, "max_hubs", "hubs")});
  }
  validate(cs, p);
  return cs;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kInvalidInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kInvalidInput, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorKind::kInvalidInput, "write failed for " + path.string());
}

Constraints read_structure_file(const std::filesystem::path& path, std::size_t p) {
  return parse_structure(read_text_file(path), p);
}

std::string result_to_json(const SolveResult& res, const Regularizer& reg) {
  const std::size_t p = res.theta.dim();
  json support = json::array();
  json entries = json::array();
  for (const Pair& e : res.support.pairs()) {
    support.push_back({e.i, e.j});
    entries.push_back({e.i, e.j, res.theta(e.i, e.j)});
  }
  json diagonal = json::array();
  for (std::size_t i = 0; i < p; ++i) diagonal.push_back(res.theta(i, i));
  json j = {
      {"p", p},
      {"k", res.k},
      {"regularizer", describe(reg)},
      {"status", to_string(res.status)},
      {"objective_upper", number(res.upper)},
      {"objective_lower", number(res.lower)},
      {"relative_gap", number(res.relative_gap)},
      {"support", support},
      {"theta", {{"diagonal", diagonal}, {"entries", entries}}},
      {"cuts", res.cuts_generated},
      {"cut_pool", res.cut_pool_size},
      {"nodes", res.nodes_explored},
      {"time_s", res.times.total_s},
      {"time_master_s", res.times.master_s},
      {"time_subproblem_s", res.times.subproblem_s},
  };
  return j.dump(2) + "\n";
}

SymmetricMatrix theta_from_json(std::string_view json_text) {
  const json j = json::parse(json_text);
  const json& t = j.at("theta");
  const auto diag = t.at("diagonal").get<std::vector<double>>();
  SymmetricMatrix theta = SymmetricMatrix::diagonal(diag);
  for (const json& e : t.at("entries")) {
    theta.set(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<double>());
  }
  return theta;
}

}  // namespace certprec
