#include "fusebound/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace fusebound {

Eigen::Index CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return static_cast<Eigen::Index>(c);
  }
  throw ValidationError("column not found: " + name);
}

Eigen::VectorXd CsvTable::col(const std::string& name) const {
  return data.col(column(name));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path + ": empty file");
  for (auto& h : split_line(line)) t.header.push_back(trim(h));
  std::size_t ncol = t.header.size();

  std::vector<double> values;
  std::size_t nrow = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != ncol) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": wrong field count");
    }
    for (const auto& f : fields) {
      std::string s = trim(f);
      if (s.empty()) {
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": missing value");
      }
      double v = 0.0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) {
        throw ValidationError(path + ":" + std::to_string(lineno) +
                              ": non-numeric field '" + s + "'");
      }
      values.push_back(v);
    }
    ++nrow;
  }
  t.data.resize(static_cast<Eigen::Index>(nrow), static_cast<Eigen::Index>(ncol));
  for (std::size_t r = 0; r < nrow; ++r) {
    for (std::size_t c = 0; c < ncol; ++c) {
      t.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          values[r * ncol + c];
    }
  }
  return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  for (std::size_t c = 0; c < header.size(); ++c) {
    out << header[c] << (c + 1 < header.size() ? "," : "\n");
  }
  out.precision(12);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c] << (c + 1 < row.size() ? "," : "\n");
    }
  }
}

}  // namespace fusebound
