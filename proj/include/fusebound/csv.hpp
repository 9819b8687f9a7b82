#ifndef FUSEBOUND_CSV_HPP
#define FUSEBOUND_CSV_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fusebound/types.hpp"

namespace fusebound {

struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd data;  // rows x columns, all numeric

  Eigen::Index column(const std::string& name) const;  // throws if absent
  Eigen::VectorXd col(const std::string& name) const;
};

// Comma-separated, header row required, '.' decimal. Rows with missing or
// non-numeric fields are rejected with a ValidationError naming the line.
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

}  // namespace fusebound

#endif  // FUSEBOUND_CSV_HPP
