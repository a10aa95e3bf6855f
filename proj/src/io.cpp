#include "rhmm/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rhmm/error.hpp"

namespace rhmm::io {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw ParseError("column '" + column + "' holds '" + text + "', not a number", line);
  }
  if (!std::isfinite(v)) throw ParseError("column '" + column + "' is not finite", line);
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double: conversion failed");
  return std::string(buf, ptr);
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<int>(j);
  }
  return -1;
}

CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split(line);
    for (auto& c : cells) c = trim(c);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw ParseError("expected " + std::to_string(t.header.size()) + " fields, found " +
                           std::to_string(cells.size()),
                       number);
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(number);
  }
  if (!have_header) throw ParseError("missing header row", number == 0 ? 1 : number);
  return t;
}

ReturnSeries returns_from_table(const CsvTable& table) {
  const int ret = table.column("return");
  const int obs = table.column("observed");
  const int price = table.column("price");
  const int date = table.column("date");
  const int value_col = ret >= 0 ? ret : obs;
  if (value_col >= 0 && price >= 0) {
    throw ParseError("header has both a return column and a price column", 1);
  }
  if (value_col < 0 && price < 0) {
    throw ParseError("header needs a 'return', 'observed' or 'price' column", 1);
  }
  if (table.rows.empty()) throw ParseError("no data rows", 2);

  const int col = value_col >= 0 ? value_col : price;
  const std::string name = table.header[static_cast<std::size_t>(col)];
  std::vector<double> values;
  std::vector<std::string> dates;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const double v = parse_number(table.rows[r][static_cast<std::size_t>(col)], table.lines[r], name);
    if (price >= 0 && !(v > 0.0)) throw ParseError("price must be positive", table.lines[r]);
    values.push_back(v);
    if (date >= 0) dates.push_back(table.rows[r][static_cast<std::size_t>(date)]);
  }
  if (price >= 0) {
    if (values.size() < 2) throw ParseError("need at least two prices", table.lines.back());
    ReturnSeries rs = returns_from_prices(values);
    if (date >= 0) dates.erase(dates.begin());
    return ReturnSeries(std::vector<double>(rs.values().begin(), rs.values().end()), dates);
  }
  return ReturnSeries(std::move(values), std::move(dates));
}

ReturnSeries read_returns(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input file " + path.string());
  return returns_from_table(read_csv(in));
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw Error("cannot write " + path.string());
}

}  // namespace rhmm::io
