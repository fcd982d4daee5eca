#include "liftpool/signal_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "liftpool/errors.hpp"
#include "liftpool/text.hpp"

namespace liftpool::harness {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& field, const std::string& where) {
  const char* begin = field.data();
  const char* end = begin + field.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\r')) --end;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end) throw IoError(where + ": '" + field + "' is not a number");
  return v;
}

}  // namespace

Tensor parse_signal_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError(origin + ": empty signal file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_fields(line);
  if (header.size() < 2 || header[0] != "channel") throw IoError(origin + ": header must be channel,t0,t1,...");
  for (std::size_t t = 1; t < header.size(); ++t) {
    if (header[t] != "t" + std::to_string(t - 1)) throw IoError(origin + ": unexpected header column '" + header[t] + "'");
  }
  const std::size_t len = header.size() - 1;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != len + 1) {
      throw IoError(where + ": expected " + std::to_string(len + 1) + " fields, got " + std::to_string(fields.size()));
    }
    if (parse_number(fields[0], where) != static_cast<double>(rows.size())) {
      throw IoError(where + ": channels must be listed as 0, 1, 2, ...");
    }
    std::vector<double> row(len);
    for (std::size_t t = 0; t < len; ++t) row[t] = parse_number(fields[t + 1], where);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(origin + ": no channel rows");
  Tensor x = Tensor::signal(rows);
  if (!x.all_finite()) throw NumericalError(origin + ": signal contains non-finite values");
  return x;
}

Tensor read_signal_csv(const std::string& path) { return parse_signal_csv(read_text_file(path), path); }

std::string signal_csv(const Tensor& x) {
  if (x.rank() != 3 || x.batch() != 1) throw ShapeError("signal_csv: expected [1, C, T]");
  std::ostringstream os;
  os << "channel";
  for (std::size_t t = 0; t < x.length(); ++t) os << ",t" << t;
  os << '\n';
  for (std::size_t c = 0; c < x.channels(); ++c) {
    os << c;
    for (double v : x.row(0, c)) os << ',' << format_exact(v);
    os << '\n';
  }
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace liftpool::harness
