// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <compare>
#include <cstdint>
#include <deque>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace evsenet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CellType : std::uint8_t { Door, Road, Evse, Parking };

inline char cell_char(CellType t) {
  switch (t) {
    case CellType::Door: return 'D';
    case CellType::Road: return 'R';
    case CellType::Evse: return 'E';
    case CellType::Parking: return 'P';
  }
  return '?';
}

inline std::optional<CellType> cell_from_char(char c) {
  switch (c) {
    case 'D': return CellType::Door;
    case 'R': return CellType::Road;
    case 'E': return CellType::Evse;
    case 'P': return CellType::Parking;
    default: return std::nullopt;
  }
}

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

// Scan order N, E, S, W is relied upon by the parking simulator.
inline constexpr std::array<Cell, 4> kNeighborOffsets{{{-1, 0}, {0, 1}, {1, 0}, {0, -1}}};

class Layout {
 public:
  Layout() = default;
  Layout(int height, int width, CellType fill = CellType::Parking)
      : height_(height), width_(width),
        cells_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {
    if (height <= 0 || width <= 0) throw Error("layout dimensions must be positive");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return cells_.size(); }

  bool in_bounds(Cell c) const { return c.row >= 0 && c.col >= 0 && c.row < height_ && c.col < width_; }
  bool on_boundary(Cell c) const {
    return c.row == 0 || c.col == 0 || c.row == height_ - 1 || c.col == width_ - 1;
  }

  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.col);
  }
  Cell cell_at(std::size_t idx) const {
    return {static_cast<int>(idx / static_cast<std::size_t>(width_)),
            static_cast<int>(idx % static_cast<std::size_t>(width_))};
  }

  CellType at(Cell c) const { return cells_[index(c)]; }
  CellType at(int row, int col) const { return at(Cell{row, col}); }
  void set(Cell c, CellType t) { cells_[index(c)] = t; }

  const std::vector<CellType>& cells() const { return cells_; }

  std::vector<Cell> cells_of(CellType t) const {
    std::vector<Cell> out;
    for (std::size_t i = 0; i < cells_.size(); ++i)
      if (cells_[i] == t) out.push_back(cell_at(i));
    return out;
  }
  std::size_t count(CellType t) const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), t));
  }

  bool operator==(const Layout&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<CellType> cells_;
};

inline bool is_road_like(CellType t) { return t == CellType::Road || t == CellType::Door; }
inline bool is_spot(CellType t) { return t == CellType::Evse || t == CellType::Parking; }

/// Throws if any door sits off the boundary.
inline void validate_layout(const Layout& layout) {
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const Cell c = layout.cell_at(i);
    if (layout.at(c) == CellType::Door && !layout.on_boundary(c))
      throw Error("door not on boundary at (" + std::to_string(c.row) + "," + std::to_string(c.col) + ")");
  }
}

inline Layout layout_from_rows(const std::vector<std::string>& rows) {
  if (rows.empty() || rows.front().empty()) throw Error("empty grid");
  const std::size_t width = rows.front().size();
  Layout layout(static_cast<int>(rows.size()), static_cast<int>(width));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width)
      throw Error("ragged rows: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                  " cells, expected " + std::to_string(width));
    for (std::size_t c = 0; c < width; ++c) {
      auto t = cell_from_char(rows[r][c]);
      if (!t)
        throw Error(std::string("unknown cell character '") + rows[r][c] + "' at (" + std::to_string(r) +
                    "," + std::to_string(c) + ")");
      layout.set({static_cast<int>(r), static_cast<int>(c)}, *t);
    }
  }
  validate_layout(layout);
  return layout;
}

inline Layout parse_layout(std::string_view text) {
  std::vector<std::string> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    rows.emplace_back(line);
    pos = nl + 1;
  }
  // A trailing blank line is the newline terminator, not a row.
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  return layout_from_rows(rows);
}

inline std::vector<std::string> layout_rows(const Layout& layout) {
  std::vector<std::string> rows(static_cast<std::size_t>(layout.height()));
  for (int r = 0; r < layout.height(); ++r) {
    auto& row = rows[static_cast<std::size_t>(r)];
    row.reserve(static_cast<std::size_t>(layout.width()));
    for (int c = 0; c < layout.width(); ++c) row.push_back(cell_char(layout.at(r, c)));
  }
  return rows;
}

inline std::string serialize_layout(const Layout& layout) {
  std::string out;
  out.reserve(layout.size() + static_cast<std::size_t>(layout.height()));
  for (const auto& row : layout_rows(layout)) {
    out += row;
    out += '\n';
  }
  return out;
}

/// Road/door cells connected to some door through road/door cells.
inline std::vector<bool> door_connected_mask(const Layout& layout) {
  std::vector<bool> seen(layout.size(), false);
  std::deque<Cell> queue;
  for (auto d : layout.cells_of(CellType::Door)) {
    seen[layout.index(d)] = true;
    queue.push_back(d);
  }
  while (!queue.empty()) {
    Cell cur = queue.front();
    queue.pop_front();
    for (auto off : kNeighborOffsets) {
      Cell n{cur.row + off.row, cur.col + off.col};
      if (!layout.in_bounds(n) || seen[layout.index(n)] || !is_road_like(layout.at(n))) continue;
      seen[layout.index(n)] = true;
      queue.push_back(n);
    }
  }
  return seen;
}

/// Spots of type `kind` adjacent to a door-connected road or door cell.
inline std::set<Cell> reachable_spots(const Layout& layout, CellType kind) {
  const auto connected = door_connected_mask(layout);
  std::set<Cell> out;
  for (auto c : layout.cells_of(kind)) {
    for (auto off : kNeighborOffsets) {
      Cell n{c.row + off.row, c.col + off.col};
      if (layout.in_bounds(n) && connected[layout.index(n)]) {
        out.insert(c);
        break;
      }
    }
  }
  return out;
}

inline std::set<Cell> reachable_evses(const Layout& layout) { return reachable_spots(layout, CellType::Evse); }

// ---------------------------------------------------------------------------
// Vehicles and schedules

enum class VehicleKind : std::uint8_t { Ev, Car };

struct VehicleEvent {
  int id = 0;
  VehicleKind kind = VehicleKind::Car;
  double arrival = 0.0;    // minutes
  double departure = 0.0;  // minutes
  double energy_demand = 0.0;  // kWh, EV only
  double peak_rate = 0.0;      // kW, EV only

  bool is_ev() const { return kind == VehicleKind::Ev; }
  double duration_hours() const { return (departure - arrival) / 60.0; }
  bool operator==(const VehicleEvent&) const = default;
};

struct Schedule {
  std::vector<VehicleEvent> events;
  double horizon = 720.0;

  const VehicleEvent* find(int id) const {
    for (const auto& e : events)
      if (e.id == id) return &e;
    return nullptr;
  }
  std::size_t ev_count() const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [](const auto& e) { return e.is_ev(); }));
  }
};

inline void validate_schedule(const Schedule& schedule) {
  std::set<int> ids;
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& e : schedule.events) {
    const std::string where = "event " + std::to_string(e.id);
    if (!ids.insert(e.id).second) throw Error("duplicate id in schedule: " + where);
    if (e.arrival < last) throw Error("schedule not sorted by arrival at " + where);
    last = e.arrival;
    if (!(e.arrival >= 0.0 && e.arrival < schedule.horizon)) throw Error("arrival outside horizon: " + where);
    if (!(e.departure > e.arrival)) throw Error("departure must follow arrival: " + where);
    if (e.is_ev()) {
      if (!(e.peak_rate > 0.0)) throw Error("EV peak rate must be positive: " + where);
      if (!(e.energy_demand >= 0.0)) throw Error("EV energy demand must be nonnegative: " + where);
      // Small slack absorbs the rounding of energy = rate * duration.
      if (e.energy_demand > e.peak_rate * e.duration_hours() * (1.0 + 1e-12) + 1e-12)
        throw Error("EV demand not achievable at peak rate: " + where);
    }
  }
}

// ---------------------------------------------------------------------------
// Placement and statistics

struct Assignment {
  int vehicle_id = 0;
  Cell cell;
  bool operator==(const Assignment&) const = default;
};

struct Placement {
  std::vector<Assignment> assignments;
  std::vector<int> skipped;

  const Assignment* find(int vehicle_id) const {
    for (const auto& a : assignments)
      if (a.vehicle_id == vehicle_id) return &a;
    return nullptr;
  }
};

/// Checks types and time-disjointness of every assignment.
inline void validate_placement(const Layout& layout, const Schedule& schedule, const Placement& placement) {
  struct Interval {
    double begin, end;
    int id;
  };
  std::vector<std::vector<Interval>> per_cell(layout.size());
  for (const auto& a : placement.assignments) {
    const auto* ev = schedule.find(a.vehicle_id);
    if (!ev) throw Error("placement references unknown vehicle " + std::to_string(a.vehicle_id));
    if (!layout.in_bounds(a.cell)) throw Error("placement cell out of bounds for vehicle " + std::to_string(a.vehicle_id));
    const CellType want = ev->is_ev() ? CellType::Evse : CellType::Parking;
    if (layout.at(a.cell) != want)
      throw Error("vehicle " + std::to_string(a.vehicle_id) + " placed on wrong cell type");
    per_cell[layout.index(a.cell)].push_back({ev->arrival, ev->departure, ev->id});
  }
  for (auto& iv : per_cell) {
    std::sort(iv.begin(), iv.end(), [](const auto& x, const auto& y) { return x.begin < y.begin; });
    for (std::size_t i = 1; i < iv.size(); ++i)
      if (iv[i].begin < iv[i - 1].end)
        throw Error("vehicles " + std::to_string(iv[i - 1].id) + " and " + std::to_string(iv[i].id) +
                    " overlap in one cell");
  }
}

struct EvseStats {
  int row = 0;
  int col = 0;
  double tau = 0.0;    // kW
  double p_tot = 0.0;  // kWh
};

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest representation that round-trips.
inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error("malformed number for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

inline int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error("malformed integer for " + std::string(what) + ": '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return fields;
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed for " + path);
}

// ---------------------------------------------------------------------------
// CSV formats

inline constexpr std::string_view kScheduleHeader = "id,kind,arrival_min,departure_min,energy_kwh,peak_rate_kw";
inline constexpr std::string_view kPlacementHeader = "ev_id,row,col";
inline constexpr std::string_view kStatsHeader = "row,col,tau_kw,p_tot_kwh";

inline std::string serialize_schedule(const Schedule& schedule) {
  std::string out(kScheduleHeader);
  out += '\n';
  for (const auto& e : schedule.events) {
    out += std::to_string(e.id);
    out += e.is_ev() ? ",EV," : ",CAR,";
    out += format_double(e.arrival) + "," + format_double(e.departure) + ",";
    if (e.is_ev()) out += format_double(e.energy_demand) + "," + format_double(e.peak_rate);
    else out += ",";
    out += '\n';
  }
  return out;
}

inline Schedule parse_schedule(std::string_view text, double horizon = 720.0) {
  auto lines = split_lines(text);
  if (lines.empty() || lines.front() != kScheduleHeader) throw Error("schedule CSV: bad or missing header");
  Schedule s;
  s.horizon = horizon;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split_csv_line(lines[i]);
    if (f.size() != 6) throw Error("schedule CSV line " + std::to_string(i + 1) + ": expected 6 fields");
    VehicleEvent e;
    e.id = parse_int(f[0], "id");
    if (f[1] == "EV") e.kind = VehicleKind::Ev;
    else if (f[1] == "CAR") e.kind = VehicleKind::Car;
    else throw Error("schedule CSV line " + std::to_string(i + 1) + ": unknown kind '" + std::string(f[1]) + "'");
    e.arrival = parse_double(f[2], "arrival_min");
    e.departure = parse_double(f[3], "departure_min");
    if (e.is_ev()) {
      e.energy_demand = parse_double(f[4], "energy_kwh");
      e.peak_rate = parse_double(f[5], "peak_rate_kw");
    } else if (!f[4].empty() || !f[5].empty()) {
      throw Error("schedule CSV line " + std::to_string(i + 1) + ": CAR rows must leave energy fields empty");
    }
    s.events.push_back(e);
  }
  validate_schedule(s);
  return s;
}

inline std::string serialize_placement(const Placement& placement) {
  std::string out(kPlacementHeader);
  out += '\n';
  for (const auto& a : placement.assignments)
    out += std::to_string(a.vehicle_id) + "," + std::to_string(a.cell.row) + "," + std::to_string(a.cell.col) + "\n";
  return out;
}

/// Skipped vehicles are not stored in the file; pass the schedule to recover them.
inline Placement parse_placement(std::string_view text, const Schedule* schedule = nullptr) {
  auto lines = split_lines(text);
  if (lines.empty() || lines.front() != kPlacementHeader) throw Error("placement CSV: bad or missing header");
  Placement p;
  std::set<int> seen;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split_csv_line(lines[i]);
    if (f.size() != 3) throw Error("placement CSV line " + std::to_string(i + 1) + ": expected 3 fields");
    Assignment a{parse_int(f[0], "ev_id"), {parse_int(f[1], "row"), parse_int(f[2], "col")}};
    if (!seen.insert(a.vehicle_id).second) throw Error("placement CSV: duplicate vehicle " + std::to_string(a.vehicle_id));
    p.assignments.push_back(a);
  }
  if (schedule)
    for (const auto& e : schedule->events)
      if (!seen.count(e.id)) p.skipped.push_back(e.id);
  return p;
}

inline std::string serialize_stats(const std::vector<EvseStats>& stats) {
  std::string out(kStatsHeader);
  out += '\n';
  for (const auto& s : stats)
    out += std::to_string(s.row) + "," + std::to_string(s.col) + "," + format_double(s.tau) + "," +
           format_double(s.p_tot) + "\n";
  return out;
}

inline std::vector<EvseStats> parse_stats(std::string_view text) {
  auto lines = split_lines(text);
  if (lines.empty() || lines.front() != kStatsHeader) throw Error("stats CSV: bad or missing header");
  std::vector<EvseStats> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    auto f = split_csv_line(lines[i]);
    if (f.size() != 4) throw Error("stats CSV line " + std::to_string(i + 1) + ": expected 4 fields");
    out.push_back({parse_int(f[0], "row"), parse_int(f[1], "col"), parse_double(f[2], "tau_kw"),
                   parse_double(f[3], "p_tot_kwh")});
  }
  return out;
}

}  // namespace evsenet
