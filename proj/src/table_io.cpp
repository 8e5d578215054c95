#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <system_error>

#include "poisbound/errors.hpp"
#include "poisbound/experiments.hpp"

namespace poisbound {

namespace {

std::string timestamp_line() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string("# generated ") + buf + "\n";
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, value);
  if (res.ec != std::errc()) throw InvalidParam("could not format number");
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return HUGE_VAL;
  if (text == "-inf") return -HUGE_VAL;
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw ConfigError("not a number: '" + text + "'");
  return value;
}

std::string write_bounds_csv(const BoundTable& table, const CsvOptions& options) {
  bool with_exact = !table.rows.empty();
  for (const auto& r : table.rows) with_exact = with_exact && r.exact.has_value();
  std::ostringstream out;
  if (options.timestamp) out << timestamp_line();
  out << "state,lower,upper,approx";
  if (with_exact) out << ",exact,rel_gap";
  out << ",appr_rel_gap,abs_gap\n";
  for (const auto& r : table.rows) {
    const GapRow g = gap_row(r);
    out << to_string(r.x) << ',' << format_double(r.lower) << ',' << format_double(r.upper) << ','
        << format_double(r.approx);
    if (with_exact) out << ',' << format_double(*r.exact) << ',' << opt_field(g.rel);
    out << ',' << opt_field(g.appr_rel) << ',' << format_double(g.abs) << '\n';
  }
  return out.str();
}

std::vector<BoundRow> parse_bounds_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<BoundRow> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_fields(line);
    if (header.empty()) {
      header = fields;
      if (header.size() < 4 || header[0] != "state") throw ConfigError("bounds csv: bad header");
      continue;
    }
    if (fields.size() != header.size()) throw ConfigError("bounds csv: ragged row '" + line + "'");
    BoundRow row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      const std::string& h = header[i];
      if (h == "state") row.x = parse_state(fields[i]);
      else if (h == "lower") row.lower = parse_double(fields[i]);
      else if (h == "upper") row.upper = parse_double(fields[i]);
      else if (h == "approx") row.approx = parse_double(fields[i]);
      else if (h == "exact") row.exact = parse_double(fields[i]);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f << content;
    if (!f) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string write_sweep_csv(const SweepResult& sweep, const CsvOptions& options) {
  std::ostringstream out;
  if (options.timestamp) out << timestamp_line();
  out << "t,n_states,gate,status,sup_rel_gap,sup_appr_rel_gap,sup_abs_gap,lower_monotone";
  if (options.timestamp) out << ",wall_seconds";
  out << '\n';
  for (const auto& s : sweep.steps) {
    out << format_double(s.t) << ',' << s.n_states << ',' << format_double(s.gate) << ',' << s.status << ','
        << opt_field(s.sup_rel) << ',' << opt_field(s.sup_appr_rel) << ',' << opt_field(s.sup_abs) << ','
        << (s.lower_monotone ? 1 : 0);
    if (options.timestamp) out << ',' << format_double(s.wall_seconds);
    out << '\n';
  }
  return out.str();
}

}  // namespace poisbound
