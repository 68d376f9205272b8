#include "mcfnc/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace mcfnc {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t\r");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

// Reads a CSV with a header, returning the column index of every required
// name and the data rows with their line numbers.
struct Table {
  std::map<std::string, std::size_t> columns;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
};

Table read_table(std::istream& in, const std::string& label, const std::vector<std::string>& required) {
  Table t;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    auto fields = split_csv(line);
    if (!header) {
      for (std::size_t c = 0; c < fields.size(); ++c) t.columns[fields[c]] = c;
      for (const auto& r : required) {
        if (!t.columns.count(r)) throw ModelError(label + ": missing column '" + r + "'");
      }
      header = true;
      continue;
    }
    if (fields.size() < t.columns.size()) {
      throw ModelError(label + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(t.columns.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    t.rows.emplace_back(lineno, std::move(fields));
  }
  if (!header) throw ModelError(label + ": empty file");
  return t;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ModelError(where + ": '" + s + "' is not a number");
  }
  return v;
}

int parse_int(const std::string& s, std::size_t pos, std::size_t len, const std::string& text) {
  int v = 0;
  const char* b = s.data() + pos;
  const auto [ptr, ec] = std::from_chars(b, b + len, v);
  if (ec != std::errc() || ptr != b + len) throw ModelError("bad timestamp '" + text + "'");
  return v;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

std::int64_t parse_iso8601(const std::string& text) {
  std::string s = text;
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.pop_back();
  if (s.size() != 16 && s.size() != 19) throw ModelError("bad timestamp '" + text + "'");
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      (s.size() == 19 && s[16] != ':')) {
    throw ModelError("bad timestamp '" + text + "'");
  }
  using namespace std::chrono;
  const year_month_day ymd{year{parse_int(s, 0, 4, text)},
                           month{static_cast<unsigned>(parse_int(s, 5, 2, text))},
                           day{static_cast<unsigned>(parse_int(s, 8, 2, text))}};
  if (!ymd.ok()) throw ModelError("bad date in timestamp '" + text + "'");
  const int hh = parse_int(s, 11, 2, text), mm = parse_int(s, 14, 2, text);
  const int ss = s.size() == 19 ? parse_int(s, 17, 2, text) : 0;
  if (hh > 23 || mm > 59 || ss > 59) throw ModelError("bad time in timestamp '" + text + "'");
  const auto days = sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 86400 + hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601(std::int64_t t) {
  using namespace std::chrono;
  const std::int64_t d = t >= 0 ? t / 86400 : (t - 86399) / 86400;
  const std::int64_t rem = t - d * 86400;
  const year_month_day ymd{sys_days{days{d}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

SensorSeries parse_sensor_csv(std::istream& in, const std::string& label) {
  const Table t = read_table(in, label, {"timestamp", "cell_id", "commodity", "flow_vph"});
  const std::size_t ct = t.columns.at("timestamp"), cc = t.columns.at("cell_id"),
                    ck = t.columns.at("commodity"), cf = t.columns.at("flow_vph");
  SensorSeries s;
  std::map<std::pair<std::string, std::string>, std::int64_t> last;
  for (const auto& [line, f] : t.rows) {
    const std::string where = label + ":" + std::to_string(line);
    SensorRecord r;
    r.line = line;
    try {
      r.time_s = parse_iso8601(f[ct]);
    } catch (const ModelError& e) {
      throw ModelError(where + ": " + e.what());
    }
    r.cell = f[cc];
    r.commodity = f[ck];
    if (r.cell.empty()) throw ModelError(where + ": empty cell_id");
    if (r.commodity.empty()) throw ModelError(where + ": empty commodity");
    r.flow_vph = parse_double(f[cf], where + ": flow_vph");
    if (r.flow_vph < 0.0) throw ModelError(where + ": negative flow " + f[cf]);
    const auto key = std::make_pair(r.cell, r.commodity);
    const auto it = last.find(key);
    if (it != last.end()) {
      if (r.time_s == it->second) {
        throw ModelError(where + ": duplicate timestamp " + f[ct] + " for cell " + r.cell + ", " + r.commodity);
      }
      if (r.time_s < it->second) {
        throw ModelError(where + ": timestamp " + f[ct] + " goes back in time for cell " + r.cell +
                         ", " + r.commodity);
      }
      const std::int64_t gap = r.time_s - it->second;
      s.interval_s = s.interval_s == 0 ? gap : std::min(s.interval_s, gap);
    }
    last[key] = r.time_s;
    s.records.push_back(std::move(r));
  }
  if (s.records.empty()) throw ModelError(label + ": no records");
  s.t0 = s.records.front().time_s;
  s.t_end = s.t0;
  for (const auto& r : s.records) {
    s.t0 = std::min(s.t0, r.time_s);
    s.t_end = std::max(s.t_end, r.time_s);
  }
  return s;
}

SensorSeries load_sensor_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open '" + path.string() + "'");
  return parse_sensor_csv(in, path.string());
}

std::vector<std::pair<std::int64_t, double>> SensorSeries::samples(const std::string& cell,
                                                                   const std::string& commodity) const {
  std::vector<std::pair<std::int64_t, double>> out;
  for (const auto& r : records) {
    if (r.cell == cell && r.commodity == commodity) out.emplace_back(r.time_s, r.flow_vph);
  }
  return out;
}

bool SensorSeries::has(const std::string& cell, const std::string& commodity) const {
  return std::any_of(records.begin(), records.end(), [&](const SensorRecord& r) {
    return r.cell == cell && r.commodity == commodity;
  });
}

std::vector<std::string> SensorSeries::commodities() const {
  std::vector<std::string> out;
  for (const auto& r : records) {
    if (std::find(out.begin(), out.end(), r.commodity) == out.end()) out.push_back(r.commodity);
  }
  return out;
}

std::vector<RoadSpec> parse_road_csv(std::istream& in, const std::string& label) {
  const Table t =
      read_table(in, label, {"road", "freeway", "pm_start", "pm_end", "from_node", "to_node"});
  std::vector<RoadSpec> roads;
  std::set<std::string> ids;
  for (const auto& [line, f] : t.rows) {
    const std::string where = label + ":" + std::to_string(line);
    RoadSpec r;
    r.id = f[t.columns.at("road")];
    r.freeway = f[t.columns.at("freeway")];
    r.pm_start = parse_double(f[t.columns.at("pm_start")], where + ": pm_start");
    r.pm_end = parse_double(f[t.columns.at("pm_end")], where + ": pm_end");
    r.from_node = f[t.columns.at("from_node")];
    r.to_node = f[t.columns.at("to_node")];
    if (t.columns.count("lanes") && !f[t.columns.at("lanes")].empty()) {
      r.lanes = parse_double(f[t.columns.at("lanes")], where + ": lanes");
      if (!(r.lanes > 0.0)) throw ModelError(where + ": lanes must be positive");
    }
    if (r.id.empty()) throw ModelError(where + ": empty road id");
    if (!ids.insert(r.id).second) throw ModelError(where + ": duplicate road '" + r.id + "'");
    if (!(r.length_mi() > 0.0)) throw ModelError(where + ": road '" + r.id + "' has zero length");
    roads.push_back(std::move(r));
  }
  return roads;
}

std::vector<RoadSpec> load_road_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open '" + path.string() + "'");
  return parse_road_csv(in, path.string());
}

SegmentedNetwork segment_roads(const std::vector<RoadSpec>& roads, double cell_length_mi,
                               double ramp_length_mi) {
  if (!(cell_length_mi > 0.0)) throw ModelError("cell length must be positive");
  if (!(ramp_length_mi > 0.0)) throw ModelError("ramp length must be positive");
  SegmentedNetwork net;
  for (const auto& road : roads) {
    const double L = road.length_mi();
    if (!(L > 0.0)) throw ModelError("road '" + road.id + "' has zero length");
    std::size_t n = static_cast<std::size_t>(std::floor(L / cell_length_mi + 1e-9));
    std::vector<double> lengths;
    if (n == 0) {
      lengths.push_back(L);
    } else {
      const double rem = L - static_cast<double>(n) * cell_length_mi;
      lengths.assign(n, cell_length_mi);
      if (rem >= 0.5 * cell_length_mi) {
        lengths.push_back(rem);
      } else {
        lengths.back() += rem;
      }
      lengths.back() = L - cell_length_mi * static_cast<double>(lengths.size() - 1);
    }
    auto node = [&](std::size_t m) {
      if (m == 0) return road.from_node.empty() ? road.id + "#src" : road.from_node;
      if (m == lengths.size()) return road.to_node.empty() ? road.id + "#sink" : road.to_node;
      return road.id + "#" + std::to_string(m);
    };
    for (std::size_t m = 0; m < lengths.size(); ++m) {
      const std::string id = road.id + "_" + std::to_string(m + 1);
      net.cells.push_back(CellSpec{id, node(m), node(m + 1), lengths[m], road.lanes, false, false, 1.0});
      net.roles.push_back(CellRole::mainline);
      net.cells.push_back(CellSpec{id + "_on", "", node(m), ramp_length_mi, 1.0, true, false, 1.0});
      net.roles.push_back(CellRole::onramp);
      net.cells.push_back(CellSpec{id + "_off", node(m + 1), "", ramp_length_mi, 1.0, false, true, 1.0});
      net.roles.push_back(CellRole::offramp);
      for (int q = 0; q < 3; ++q) net.road.push_back(road.id);
      net.road_cells[road.id].push_back(id);
    }
  }
  return net;
}

std::vector<CellPair> routing_support(const NetworkGraph& g) {
  std::vector<CellPair> out;
  for (const auto& p : g.adjacency()) {
    if (g.is_onramp(p.first) && g.is_offramp(p.second)) continue;
    out.push_back(p);
  }
  return out;
}

RoutingEstimate estimate_routing(const NetworkGraph& g, const std::vector<CellPair>& support,
                                 const SensorSeries& series, const std::string& commodity) {
  RoutingEstimate est;
  std::map<std::string, double> totals;
  for (const auto& r : series.records) {
    if (r.commodity == commodity) totals[r.cell] += r.flow_vph;
  }
  if (totals.empty()) throw ModelError("no sensor records for commodity '" + commodity + "'");
  std::vector<std::vector<CellId>> succ(g.num_cells());
  for (const auto& [i, j] : support) {
    if (!g.adjacent(i, j)) {
      throw ModelError("support pair " + g.cell(i).id + " -> " + g.cell(j).id + " is not adjacent");
    }
    succ[i.index].push_back(j);
  }
  for (std::size_t i = 0; i < g.num_cells(); ++i) {
    const CellId ci{i};
    if (g.is_offramp(ci)) continue;
    const auto& s = succ[i];
    if (s.empty()) throw ModelError("cell '" + g.cell(ci).id + "' has no downstream cell");
    double den = 0.0;
    for (CellId j : s) {
      const auto it = totals.find(g.cell(j).id);
      if (it != totals.end()) den += it->second;
    }
    if (den > 0.0) {
      for (CellId j : s) {
        const auto it = totals.find(g.cell(j).id);
        const double a = it == totals.end() ? 0.0 : it->second;
        est.entries.push_back({ci, j, a / den});
      }
    } else {
      if (s.size() > 1) {
        est.warnings.push_back("cell '" + g.cell(ci).id + "', " + commodity +
                               ": no downstream flow measured, splitting uniformly");
      }
      for (CellId j : s) est.entries.push_back({ci, j, 1.0 / static_cast<double>(s.size())});
    }
  }
  return est;
}

double measured_capacity(const SensorSeries& series, const std::string& cell) {
  std::map<std::int64_t, double> total;
  for (const auto& r : series.records) {
    if (r.cell == cell) total[r.time_s] += r.flow_vph;
  }
  double c = 0.0;
  for (const auto& [t, v] : total) c = std::max(c, v);
  return c;
}

SupplyFunction calibrate_supply(double capacity, const SupplyCalibration& p) {
  if (!(capacity > 0.0)) throw ModelError("capacity must be positive (all-zero flows?)");
  const std::size_t kc = p.vehicle_lengths.size();
  if (p.mix.size() != kc || p.demand_slopes.size() != kc) {
    throw ModelError("supply calibration needs one length, share and slope per commodity");
  }
  double share = 0.0, rate = 0.0, avg_len = 0.0;
  for (std::size_t k = 0; k < kc; ++k) {
    share += p.mix[k];
    rate += p.mix[k] * p.demand_slopes[k];
    avg_len += p.mix[k] * p.vehicle_lengths[k];
  }
  if (std::abs(share - 1.0) > 1e-9) throw ModelError("traffic split must sum to 1");
  if (!(rate > 0.0)) throw ModelError("aggregate demand slope must be positive");
  const double v_jam = p.beta * p.length_mi * p.lanes;
  const double v_cap = capacity / rate * avg_len;
  if (!(v_cap < v_jam)) {
    throw ModelError("capacity " + fmt(capacity) + " veh/h is not reached before jam");
  }
  const double slope = -capacity / (v_jam - v_cap);
  return SupplyFunction({{slope, -slope * v_jam}}, p.vehicle_lengths);
}

SupplyFunction calibrate_supply(const SensorSeries& series, const SupplyCalibration& params,
                                const std::string& cell) {
  const double c = measured_capacity(series, cell);
  if (!(c > 0.0)) throw ModelError("cell '" + cell + "': no positive flow to calibrate capacity");
  return calibrate_supply(c, params);
}

double recommend_step(double bound, double quantum) {
  if (!(bound > 0.0) || !(quantum > 0.0)) throw ModelError("step bound and quantum must be positive");
  const double k = std::ceil(bound / quantum - 1e-9) - 1.0;
  if (k >= 1.0) return k * quantum;
  const double seconds = std::ceil(bound * 3600.0 - 1e-9) - 1.0;
  if (seconds < 1.0) throw ModelError("stability bound is below one second");
  return seconds / 3600.0;
}

CalibrationResult calibrate(const std::vector<RoadSpec>& roads, const SensorSeries& series,
                            const CalibrationSettings& st) {
  const std::size_t kc = st.commodities.size();
  if (st.mainline_speed_mph.size() != kc || st.vehicle_lengths_mi.size() != kc) {
    throw ModelError("calibration settings need one speed and one length per commodity");
  }
  if (kc != 1 && kc != 2) throw ModelError("the traffic split is defined for one or two commodities");
  if (!(st.car_split >= 0.0 && st.car_split <= 1.0)) throw ModelError("split must lie in [0, 1]");
  const std::vector<double> mix = kc == 1 ? std::vector<double>{1.0}
                                          : std::vector<double>{st.car_split, 1.0 - st.car_split};
  for (const auto& name : series.commodities()) {
    if (std::find(st.commodities.begin(), st.commodities.end(), name) == st.commodities.end()) {
      throw ModelError("sensor commodity '" + name + "' is not one of the configured commodities");
    }
  }

  CalibrationResult res;
  res.segments = segment_roads(roads, st.cell_length_mi, st.ramp_length_mi);
  const auto& seg = res.segments;
  NetworkConfig& cfg = res.network;
  cfg.cells = seg.cells;
  cfg.commodities = CommoditySet(st.commodities);
  cfg.vehicle_lengths = st.vehicle_lengths_mi;
  cfg.shares = mix;
  const NetworkGraph g(cfg.cells);
  const std::size_t n = g.num_cells();

  std::set<std::string> sensed;
  for (const auto& r : series.records) sensed.insert(r.cell);
  for (const auto& name : sensed) {
    if (!g.find_cell(name)) res.warnings.push_back("sensor cell '" + name + "' is not in the network");
  }

  cfg.fd = FundamentalDiagram(n, kc);
  std::map<std::string, double> road_capacity;
  for (std::size_t i = 0; i < n; ++i) {
    if (seg.roles[i] == CellRole::mainline) {
      auto& c = road_capacity[seg.road[i]];
      c = std::max(c, measured_capacity(series, seg.cells[i].id));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = seg.cells[i];
    const bool ramp = seg.roles[i] != CellRole::mainline;
    std::vector<double> slopes(kc);
    for (std::size_t k = 0; k < kc; ++k) {
      slopes[k] = (ramp ? st.ramp_speed_mph : st.mainline_speed_mph[k]) / c.length_mi;
      cfg.fd.demand(CellId{i}, CommodityId{k}) = DemandFunction::linear(slopes[k]);
    }
    if (ramp) {
      cfg.fd.supply(CellId{i}) = SupplyFunction::unbounded(st.vehicle_lengths_mi);
      continue;
    }
    double cap = measured_capacity(series, c.id);
    if (!(cap > 0.0)) {
      cap = road_capacity[seg.road[i]];
      if (!(cap > 0.0)) throw ModelError("road '" + seg.road[i] + "': no mainline flow to calibrate capacity");
      res.warnings.push_back("cell '" + c.id + "': no sensor flow, using the road's capacity " + fmt(cap));
    }
    SupplyCalibration p{c.length_mi, c.lanes, c.beta, st.vehicle_lengths_mi, mix, slopes};
    try {
      cfg.fd.supply(CellId{i}) = calibrate_supply(cap, p);
    } catch (const ModelError& e) {
      throw ModelError("cell '" + c.id + "': " + e.what());
    }
  }

  const auto support = routing_support(g);
  cfg.routing = RoutingSchedule(kc);
  cfg.routing.add_segment(0);
  const auto present = series.commodities();
  for (std::size_t k = 0; k < kc; ++k) {
    if (std::find(present.begin(), present.end(), st.commodities[k]) == present.end()) {
      res.warnings.push_back("no sensor records for " + st.commodities[k] + ", splitting uniformly");
      std::vector<std::size_t> outdeg(n, 0);
      for (const auto& p : support) ++outdeg[p.first.index];
      for (const auto& [i, j] : support) {
        cfg.routing.set(0, CommodityId{k}, i, j, 1.0 / static_cast<double>(outdeg[i.index]));
      }
      continue;
    }
    auto est = estimate_routing(g, support, series, st.commodities[k]);
    for (const auto& e : est.entries) cfg.routing.set(0, CommodityId{k}, e.from, e.to, e.ratio);
    res.warnings.insert(res.warnings.end(), est.warnings.begin(), est.warnings.end());
  }

  res.stable_bound_hours = max_stable_step(g, cfg.fd);
  res.step_hours = recommend_step(res.stable_bound_hours);
  res.steps = static_cast<std::size_t>(std::llround(st.horizon_hours / res.step_hours));

  // Initial volumes: free-flow inversion of the first sample of each cell.
  res.initial = Json::array();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kc; ++k) {
      const auto s = series.samples(seg.cells[i].id, st.commodities[k]);
      if (s.empty() || s.front().first != series.t0 || s.front().second == 0.0) continue;
      const double slope = cfg.fd.demand(CellId{i}, CommodityId{k}).free_flow_slope();
      res.initial.push_back(Json{{"cell", seg.cells[i].id},
                                 {"commodity", st.commodities[k]},
                                 {"volume", s.front().second / slope}});
    }
  }

  // Onramp inflows: average of the onramp sensor over each period.
  res.inflow = Json::array();
  const double period_s = st.inflow_period_hours * 3600.0;
  const double h_s = res.step_hours * 3600.0;
  const std::size_t periods =
      static_cast<std::size_t>(std::ceil(st.horizon_hours / st.inflow_period_hours - 1e-9));
  for (std::size_t i = 0; i < n; ++i) {
    if (seg.roles[i] != CellRole::onramp) continue;
    for (std::size_t k = 0; k < kc; ++k) {
      const auto s = series.samples(seg.cells[i].id, st.commodities[k]);
      if (s.empty()) {
        res.warnings.push_back("onramp '" + seg.cells[i].id + "', " + st.commodities[k] +
                               ": no sensor, zero inflow");
        continue;
      }
      Json profile = Json::array();
      for (std::size_t q = 0; q < periods; ++q) {
        const double a = series.t0 + q * period_s, b = a + period_s;
        double sum = 0.0;
        std::size_t cnt = 0;
        for (const auto& [t, v] : s) {
          if (t >= a && t < b) {
            sum += v;
            ++cnt;
          }
        }
        const std::size_t t_start = static_cast<std::size_t>(std::llround(q * period_s / h_s));
        if (t_start >= res.steps) break;
        profile.push_back(Json::array({t_start, cnt ? sum / static_cast<double>(cnt) : 0.0}));
      }
      res.inflow.push_back(Json{{"cell", seg.cells[i].id},
                                {"commodity", st.commodities[k]},
                                {"profile", profile}});
    }
  }
  return res;
}

}  // namespace mcfnc
