#include <algorithm>
#include <cstdio>
#include <sstream>

#include "evrptw/bench.hpp"
#include "evrptw/error.hpp"

namespace evrptw::bench {

TableFormat table_format_from_string(std::string_view s) {
  if (s == "text") return TableFormat::Text;
  if (s == "markdown" || s == "md") return TableFormat::Markdown;
  if (s == "csv") return TableFormat::Csv;
  throw InvalidArgument("unknown table format '" + std::string(s) + "' (expected text, markdown or csv)");
}

namespace {

using Row = std::vector<std::string>;

std::string full(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string render_text(const Row& header, const std::vector<Row>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const Row& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  auto line = [&](const Row& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c > 0) out << "  ";
      // Labels left-aligned, numbers right-aligned.
      if (c < 2) {
        out << r[c] << std::string(width[c] - r[c].size(), ' ');
      } else {
        out << std::string(width[c] - r[c].size(), ' ') << r[c];
      }
    }
    out << "\n";
  };
  line(header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << "\n";
  for (const Row& r : rows) line(r);
  return out.str();
}

std::string render_markdown(const Row& header, const std::vector<Row>& rows) {
  std::ostringstream out;
  out << "|";
  for (const auto& h : header) out << " " << h << " |";
  out << "\n|";
  for (std::size_t c = 0; c < header.size(); ++c) out << (c < 2 ? " --- |" : " ---: |");
  out << "\n";
  for (const Row& r : rows) {
    out << "|";
    for (const auto& v : r) out << " " << v << " |";
    out << "\n";
  }
  return out.str();
}

// Index of the best method in a cell under `better`, among complete methods.
template <typename Key, typename Better>
std::optional<std::size_t> best_index(const CellResult& cell, Key key, Better better, bool need_cost) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < cell.methods.size(); ++i) {
    const MethodStats& m = cell.methods[i];
    if (m.incomplete || (need_cost && !m.has_cost())) continue;
    if (!best || better(key(m), key(cell.methods[*best]))) best = i;
  }
  return best;
}

std::string emphasize(std::string s, bool on, TableFormat f) {
  return on && f == TableFormat::Markdown ? "**" + s + "**" : s;
}

std::string emit_csv(const std::vector<CellResult>& results) {
  std::ostringstream out;
  out << "cell,method,instances,feasible,timeouts,incomplete,certified,D,K,J,gap,success,time,baseline\n";
  for (const CellResult& cell : results) {
    for (const MethodStats& m : cell.methods) {
      out << cell.label << ',' << to_string(m.method) << ',' << m.instances << ',' << m.feasible << ','
          << m.timeouts << ',' << (m.incomplete ? 1 : 0) << ',' << (m.certified ? 1 : 0) << ',';
      if (m.has_cost()) {
        out << full(m.mean_distance) << ',' << full(m.mean_fleet) << ',' << full(m.mean_cost) << ',';
      } else {
        out << ",,,";
      }
      out << (m.gap ? full(*m.gap) : "") << ',' << full(m.success_rate) << ',' << full(m.mean_runtime) << ','
          << (cell.baseline ? std::string(to_string(*cell.baseline)) : "") << "\n";
    }
  }
  return out.str();
}

}  // namespace

std::string emit_tables(const std::vector<CellResult>& results, TableFormat format) {
  if (format == TableFormat::Csv) return emit_csv(results);

  const Row cost_header{"Cell", "Method", "D", "K", "J", "Delta%"};
  const Row succ_header{"Cell", "Method", "Succ.(%)", "Time(s)"};
  std::vector<Row> cost_rows;
  std::vector<Row> succ_rows;
  for (const CellResult& cell : results) {
    const auto best_cost = best_index(
        cell, [](const MethodStats& m) { return m.mean_cost; }, [](double a, double b) { return a < b; }, true);
    const auto best_succ = best_index(
        cell, [](const MethodStats& m) { return m.success_rate; }, [](double a, double b) { return a > b; }, false);
    for (std::size_t i = 0; i < cell.methods.size(); ++i) {
      const MethodStats& m = cell.methods[i];
      const std::string name(to_string(m.method));
      if (m.incomplete) {
        cost_rows.push_back({cell.label, name, "-", "-", "-", "-"});
        succ_rows.push_back({cell.label, name, "-", "-"});
        continue;
      }
      if (m.has_cost()) {
        cost_rows.push_back({cell.label, name, format_fixed(m.mean_distance), format_fixed(m.mean_fleet, 2),
                             emphasize(format_fixed(m.mean_cost), best_cost == i, format),
                             m.gap ? format_fixed(*m.gap) : "-"});
      } else {
        cost_rows.push_back({cell.label, name, "-", "-", "-", "-"});
      }
      succ_rows.push_back({cell.label, name, emphasize(format_fixed(m.success_rate), best_succ == i, format),
                           format_fixed(m.mean_runtime, 3)});
    }
  }
  if (format == TableFormat::Markdown) {
    return render_markdown(cost_header, cost_rows) + "\n" + render_markdown(succ_header, succ_rows);
  }
  return render_text(cost_header, cost_rows) + "\n" + render_text(succ_header, succ_rows);
}

}  // namespace evrptw::bench
