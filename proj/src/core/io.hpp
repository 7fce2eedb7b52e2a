#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace pop {

/// Shortest 17-significant-digit decimal form; round-trips any finite double exactly.
std::string format_double(double v);

double parse_double(const std::string& token, const std::string& context);
long parse_long(const std::string& token, const std::string& context);

std::vector<std::string> split(const std::string& line, char sep);

/// Matrix CSV with the one-line header `# rows cols num_id num_proxies`.
void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, int num_id,
                     int num_proxies);

struct LoadedMatrix {
  Eigen::MatrixXd entries;
  int num_id = 0;
  int num_proxies = 0;
};
LoadedMatrix load_matrix_csv(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace pop
