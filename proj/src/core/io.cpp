#include "core/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "core/common.hpp"

namespace pop {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& token, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorKind::io, "expected a number, got '" + token + "' (" + context + ")");
  return v;
}

long parse_long(const std::string& token, const std::string& context) {
  errno = 0;
  char* end = nullptr;
  long v = std::strtol(token.c_str(), &end, 10);
  if (end == token.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorKind::io, "expected an integer, got '" + token + "' (" + context + ")");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void save_matrix_csv(const std::string& path, const Eigen::MatrixXd& m, int num_id,
                     int num_proxies) {
  std::ostringstream os;
  os << "# " << m.rows() << " " << m.cols() << " " << num_id << " " << num_proxies << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) os << ",";
      os << format_double(m(i, j));
    }
    os << "\n";
  }
  write_file(path, os.str());
}

LoadedMatrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open matrix file: " + path);
  std::string header;
  std::getline(in, header);
  if (header.empty() || header[0] != '#')
    fail(ErrorKind::io, path + ": missing '# rows cols num_id num_proxies' header");
  std::istringstream hs(header.substr(1));
  long rows = 0, cols = 0;
  LoadedMatrix out;
  if (!(hs >> rows >> cols >> out.num_id >> out.num_proxies) || rows <= 0 || cols <= 0)
    fail(ErrorKind::io, path + ": malformed matrix header '" + header + "'");
  out.entries.resize(rows, cols);
  std::string line;
  for (long i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) fail(ErrorKind::io, path + ": truncated after " + std::to_string(i) + " rows");
    auto fields = split(line, ',');
    if (static_cast<long>(fields.size()) != cols)
      fail(ErrorKind::io, path + ": row " + std::to_string(i) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(cols));
    for (long j = 0; j < cols; ++j)
      out.entries(i, j) = parse_double(fields[j], path + " row " + std::to_string(i));
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot open file for writing: " + path);
  out << content;
  if (!out) fail(ErrorKind::io, "write failed: " + path);
}

}  // namespace pop
