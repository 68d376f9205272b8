#include "mcfnc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace mcfnc {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ModelError(where + ": " + what);
}

const Json& member(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(where, "expected a finite number");
  return v;
}

double number_or(const Json& j, const char* key, double fallback, const std::string& where) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : number(*it, where + "." + key);
}

std::string text(const Json& j, const std::string& where) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  fail(where, "expected a string");
}

std::string text_or(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  return it == j.end() || it->is_null() ? std::string() : text(*it, where + "." + key);
}

bool flag_or(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return false;
  if (!it->is_boolean()) fail(where + "." + key, "expected true or false");
  return it->get<bool>();
}

std::size_t count(const Json& j, const std::string& where) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    fail(where, "expected a non-negative integer");
  }
  return static_cast<std::size_t>(j.get<long long>());
}

const Json& array(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array");
  return j;
}

std::vector<AffinePiece> pieces(const Json& j, const std::string& where) {
  std::vector<AffinePiece> out;
  const auto& a = array(j, where);
  for (std::size_t q = 0; q < a.size(); ++q) {
    const std::string w = where + "[" + std::to_string(q) + "]";
    if (!a[q].is_array() || a[q].size() != 2) fail(w, "expected [slope, intercept]");
    out.push_back({number(a[q][0], w + "[0]"), number(a[q][1], w + "[1]")});
  }
  return out;
}

Json pieces_json(const std::vector<AffinePiece>& ps) {
  Json a = Json::array();
  for (const auto& p : ps) a.push_back(Json::array({p.slope, p.intercept}));
  return a;
}

std::string field(const std::string& where, std::size_t index) {
  return where + "[" + std::to_string(index) + "]";
}

CellId lookup_cell(const NetworkGraph& g, const Json& j, const std::string& where) {
  const auto name = text(j, where);
  const auto id = g.find_cell(name);
  if (!id) fail(where, "unknown cell '" + name + "'");
  return *id;
}

CommodityId lookup_commodity(const CommoditySet& ks, const Json& j, const std::string& where) {
  const auto name = text(j, where);
  const auto id = ks.find(name);
  if (!id) fail(where, "unknown commodity '" + name + "'");
  return *id;
}

// Values inline, or a path string resolved against `base`. Returns the value
// and the label used in messages.
std::pair<Json, std::string> resolve(const Json& j, const fs::path& base, const std::string& where) {
  if (j.is_string()) {
    const fs::path p = base / j.get<std::string>();
    return {read_json_file(p), p.string()};
  }
  return {j, where};
}

DemandFunction parse_demand(const Json& j, double length_mi, const std::string& where) {
  if (!j.is_object()) fail(where, "expected a demand object");
  try {
    if (j.contains("free_flow_mph")) {
      return DemandFunction::free_flow(number(j["free_flow_mph"], where + ".free_flow_mph"),
                                       length_mi);
    }
    if (j.contains("slope")) return DemandFunction::linear(number(j["slope"], where + ".slope"));
    if (j.contains("pieces")) return DemandFunction(pieces(j["pieces"], where + ".pieces"));
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    if (msg.rfind(where, 0) == 0) throw;
    fail(where, msg);
  }
  fail(where, "demand needs one of free_flow_mph, slope or pieces");
}

SupplyFunction parse_supply(const Json& j, const CellSpec& cell, const NetworkConfig& cfg,
                            const std::string& where) {
  const auto& lengths = cfg.vehicle_lengths;
  const bool have_lengths =
      std::all_of(lengths.begin(), lengths.end(), [](double v) { return v > 0.0; });
  if (j.is_string()) {
    if (j.get<std::string>() != "unbounded") fail(where, "unknown supply '" + j.get<std::string>() + "'");
    return SupplyFunction::unbounded(have_lengths ? lengths : std::vector<double>(lengths.size(), 1.0));
  }
  if (!j.is_object()) fail(where, "expected a supply object or \"unbounded\"");
  try {
    if (j.contains("wave_speed_mph")) {
      if (!have_lengths) fail(where, "wave_speed_mph needs length_mi on every commodity");
      double total = 0.0;
      for (double s : cfg.shares) total += s;
      if (std::abs(total - 1.0) > 1e-9) fail(where, "commodity shares must sum to 1");
      return make_length_weighted_supply(number(j["wave_speed_mph"], where + ".wave_speed_mph"),
                                         cell.length_mi, cell.lanes, cell.beta, lengths,
                                         cfg.shares);
    }
    if (j.contains("pieces")) {
      std::vector<double> weights = lengths;
      if (j.contains("weights")) {
        weights.clear();
        const auto& w = array(j["weights"], where + ".weights");
        for (std::size_t k = 0; k < w.size(); ++k) weights.push_back(number(w[k], field(where + ".weights", k)));
      } else if (!have_lengths) {
        fail(where, "supply pieces need weights or commodity lengths");
      }
      return SupplyFunction(pieces(j["pieces"], where + ".pieces"), weights);
    }
  } catch (const ModelError& e) {
    const std::string msg = e.what();
    if (msg.rfind(where, 0) == 0) throw;
    fail(where, msg);
  }
  fail(where, "supply needs wave_speed_mph or pieces");
}

void write_number(std::ostream& out, double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, ptr - buf);
}

}  // namespace

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(path.string() + ": invalid JSON: " + e.what());
  }
}

void write_json_file(const fs::path& path, const Json& value) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out << value.dump(2) << '\n';
}

NetworkConfig parse_network(const Json& j, const std::string& where) {
  NetworkConfig cfg;
  {
    const std::string w = where + ".commodities";
    const auto& a = array(member(j, "commodities", where), w);
    std::vector<std::string> names;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const std::string wk = field(w, k);
      if (a[k].is_string()) {
        names.push_back(a[k].get<std::string>());
        cfg.vehicle_lengths.push_back(0.0);
        cfg.shares.push_back(0.0);
      } else {
        names.push_back(text(member(a[k], "name", wk), wk + ".name"));
        cfg.vehicle_lengths.push_back(number_or(a[k], "length_mi", 0.0, wk));
        cfg.shares.push_back(number_or(a[k], "share", 0.0, wk));
      }
    }
    try {
      cfg.commodities = CommoditySet(names);
    } catch (const ModelError& e) {
      fail(w, e.what());
    }
  }
  const std::size_t kc = cfg.commodities.size();

  const Json none = Json::object();
  const auto dit = j.find("defaults");
  const Json& defaults = dit == j.end() ? none : *dit;
  if (defaults.contains("demand")) {
    for (const auto& [key, value] : defaults["demand"].items()) {
      lookup_commodity(cfg.commodities, key, where + ".defaults.demand");
    }
  }

  const std::string wc = where + ".cells";
  const auto& cells = array(member(j, "cells", where), wc);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string w = field(wc, i);
    const auto& c = cells[i];
    CellSpec spec;
    spec.id = text(member(c, "id", w), w + ".id");
    spec.tail = text_or(c, "tail", w);
    spec.head = text_or(c, "head", w);
    spec.length_mi = number(member(c, "length_mi", w), w + ".length_mi");
    spec.lanes = number_or(c, "lanes", 1.0, w);
    spec.beta = number_or(c, "beta", 1.0, w);
    spec.is_onramp = flag_or(c, "onramp", w);
    spec.is_offramp = flag_or(c, "offramp", w);
    cfg.cells.push_back(spec);
  }
  NetworkGraph graph;
  try {
    graph = NetworkGraph(cfg.cells);
  } catch (const ModelError& e) {
    fail(wc, e.what());
  }

  cfg.fd = FundamentalDiagram(cfg.cells.size(), kc);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string w = field(wc, i);
    const auto& c = cells[i];
    const auto& spec = cfg.cells[i];
    if (c.contains("demand")) {
      if (!c["demand"].is_object()) fail(w + ".demand", "expected an object keyed by commodity");
      for (const auto& [key, value] : c["demand"].items()) lookup_commodity(cfg.commodities, key, w + ".demand");
    }
    for (std::size_t k = 0; k < kc; ++k) {
      const auto& name = cfg.commodities.name(CommodityId{k});
      const Json* d = nullptr;
      std::string wd;
      if (c.contains("demand") && c["demand"].contains(name)) {
        d = &c["demand"][name];
        wd = w + ".demand." + name;
      } else if (defaults.contains("demand") && defaults["demand"].contains(name)) {
        d = &defaults["demand"][name];
        wd = where + ".defaults.demand." + name;
      } else {
        fail(w, "no demand for commodity '" + name + "'");
      }
      cfg.fd.demand(CellId{i}, CommodityId{k}) = parse_demand(*d, spec.length_mi, wd);
    }
    if (c.contains("supply")) {
      cfg.fd.supply(CellId{i}) = parse_supply(c["supply"], spec, cfg, w + ".supply");
    } else if (spec.is_onramp) {
      cfg.fd.supply(CellId{i}) = parse_supply(Json("unbounded"), spec, cfg, w + ".supply");
    } else if (defaults.contains("supply")) {
      cfg.fd.supply(CellId{i}) =
          parse_supply(defaults["supply"], spec, cfg, where + ".defaults.supply (cell " + spec.id + ")");
    } else {
      fail(w, "no supply and no defaults.supply");
    }
  }
  try {
    cfg.fd.validate();
  } catch (const ModelError& e) {
    fail(where, e.what());
  }

  if (j.contains("routing")) {
    cfg.routing = parse_routing(j["routing"], graph, cfg.commodities, where + ".routing");
  } else {
    cfg.routing = RoutingSchedule(kc);
    cfg.routing.add_segment(0);
  }
  return cfg;
}

NetworkConfig load_network(const fs::path& path) {
  return parse_network(read_json_file(path), path.string());
}

Json network_to_json(const NetworkConfig& cfg) {
  Json j;
  Json ks = Json::array();
  for (std::size_t k = 0; k < cfg.commodities.size(); ++k) {
    Json c;
    c["name"] = cfg.commodities.name(CommodityId{k});
    if (k < cfg.vehicle_lengths.size() && cfg.vehicle_lengths[k] > 0.0) c["length_mi"] = cfg.vehicle_lengths[k];
    if (k < cfg.shares.size() && cfg.shares[k] > 0.0) c["share"] = cfg.shares[k];
    ks.push_back(c);
  }
  j["commodities"] = ks;
  Json cells = Json::array();
  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    const auto& s = cfg.cells[i];
    Json c;
    c["id"] = s.id;
    c["tail"] = s.tail;
    c["head"] = s.head;
    c["length_mi"] = s.length_mi;
    c["lanes"] = s.lanes;
    if (s.beta != 1.0) c["beta"] = s.beta;
    if (s.is_onramp) c["onramp"] = true;
    if (s.is_offramp) c["offramp"] = true;
    Json d;
    for (std::size_t k = 0; k < cfg.commodities.size(); ++k) {
      d[cfg.commodities.name(CommodityId{k})]["pieces"] =
          pieces_json(cfg.fd.demand(CellId{i}, CommodityId{k}).pieces());
    }
    c["demand"] = d;
    const auto& sup = cfg.fd.supply(CellId{i});
    if (sup.is_unbounded()) {
      c["supply"] = "unbounded";
    } else {
      c["supply"]["pieces"] = pieces_json(sup.pieces());
      c["supply"]["weights"] = sup.weights();
    }
    cells.push_back(c);
  }
  j["cells"] = cells;
  j["routing"] = routing_to_json(cfg.routing, NetworkGraph(cfg.cells), cfg.commodities);
  return j;
}

RoutingSchedule parse_routing(const Json& j, const NetworkGraph& g, const CommoditySet& ks,
                              const std::string& where) {
  RoutingSchedule rs(ks.size());
  const auto& segs = array(j, where);
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const std::string w = field(where, s);
    const auto& seg = segs[s];
    const std::size_t t0 = count(member(seg, "t_start", w), w + ".t_start");
    rs.add_segment(t0);
    for (const auto& [key, entries] : seg.items()) {
      if (key == "t_start") continue;
      const auto k = ks.find(key);
      if (!k) fail(w, "unknown commodity '" + key + "'");
      const std::string wk = w + "." + key;
      const auto& a = array(entries, wk);
      for (std::size_t e = 0; e < a.size(); ++e) {
        const std::string we = field(wk, e);
        if (!a[e].is_array() || a[e].size() != 3) fail(we, "expected [from, to, ratio]");
        const auto from = lookup_cell(g, a[e][0], we + "[0]");
        const auto to = lookup_cell(g, a[e][1], we + "[1]");
        rs.set(t0, *k, from, to, number(a[e][2], we + "[2]"));
      }
    }
  }
  const auto report = validate_routing(rs, g);
  if (!report.ok()) {
    const auto& v = report.violations.front();
    std::ostringstream msg;
    msg << "commodity '" << ks.name(v.commodity) << "' segment t_start=" << v.t_start << ", cell '"
        << g.cell(v.from).id << "': ";
    switch (v.kind) {
      case RoutingViolation::Kind::row_sum:
        msg << "ratios sum to " << v.value << ", expected " << v.expected;
        break;
      case RoutingViolation::Kind::outside_adjacency:
        msg << "ratio towards non-adjacent cell '" << g.cell(*v.to).id << "'";
        break;
      case RoutingViolation::Kind::out_of_range:
        msg << "ratio " << v.value << " outside [0, 1]";
        break;
    }
    if (report.violations.size() > 1) msg << " (+" << report.violations.size() - 1 << " more)";
    fail(where, msg.str());
  }
  return rs;
}

Json routing_to_json(const RoutingSchedule& rs, const NetworkGraph& g, const CommoditySet& ks) {
  Json out = Json::array();
  for (const auto& seg : rs.segments()) {
    Json s;
    s["t_start"] = seg.t_start;
    for (std::size_t k = 0; k < ks.size(); ++k) {
      Json entries = Json::array();
      if (k < seg.entries.size()) {
        for (const auto& e : seg.entries[k]) {
          entries.push_back(Json::array({g.cell(e.from).id, g.cell(e.to).id, e.ratio}));
        }
      }
      s[ks.name(CommodityId{k})] = entries;
    }
    out.push_back(s);
  }
  return out;
}

ControlSchedule parse_control(const Json& j, const NetworkGraph& g, const CommoditySet& ks,
                              std::size_t steps, const std::string& where) {
  const std::size_t n = g.num_cells(), kc = ks.size();
  // Column order for array-valued alpha: "cells" when given, else network order.
  std::vector<CellId> order;
  if (j.contains("cells")) {
    const auto& a = array(j["cells"], where + ".cells");
    for (std::size_t i = 0; i < a.size(); ++i) order.push_back(lookup_cell(g, a[i], field(where + ".cells", i)));
  } else {
    for (std::size_t i = 0; i < n; ++i) order.push_back(CellId{i});
  }

  std::map<std::size_t, CellCommodityArray> starts;
  const auto& segs = array(member(j, "segments", where), where + ".segments");
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const std::string w = field(where + ".segments", s);
    const auto& seg = segs[s];
    const std::size_t t0 = count(member(seg, "t_start", w), w + ".t_start");
    if (t0 >= steps && steps > 0) fail(w + ".t_start", "beyond the horizon of " + std::to_string(steps) + " steps");
    if (starts.count(t0)) fail(w + ".t_start", "duplicate segment start");
    CellCommodityArray a(n, kc, 1.0);
    if (seg.contains("alpha")) {
      const auto& al = seg["alpha"];
      if (!al.is_object()) fail(w + ".alpha", "expected an object keyed by commodity");
      for (const auto& [key, values] : al.items()) {
        const auto k = ks.find(key);
        if (!k) fail(w + ".alpha", "unknown commodity '" + key + "'");
        const std::string wk = w + ".alpha." + key;
        auto put = [&](CellId c, const Json& v, const std::string& wv) {
          const double x = number(v, wv);
          if (x < 0.0 || x > 1.0) fail(wv, "alpha " + std::to_string(x) + " outside [0, 1]");
          a(c, *k) = x;
        };
        if (values.is_array()) {
          if (values.size() != order.size()) {
            fail(wk, "expected " + std::to_string(order.size()) + " values, got " +
                         std::to_string(values.size()));
          }
          for (std::size_t i = 0; i < values.size(); ++i) put(order[i], values[i], field(wk, i));
        } else if (values.is_object()) {
          for (const auto& [cell, v] : values.items()) put(lookup_cell(g, Json(cell), wk), v, wk + "." + cell);
        } else {
          fail(wk, "expected an array or an object");
        }
      }
    }
    starts.emplace(t0, std::move(a));
  }
  if (!starts.empty() && starts.begin()->first != 0) fail(where + ".segments", "first segment must start at 0");

  ControlSchedule u = ControlSchedule::uniform(steps, n, kc);
  auto it = starts.begin();
  for (std::size_t t = 0; t < steps && it != starts.end(); ++t) {
    auto next = std::next(it);
    if (next != starts.end() && next->first == t) it = next;
    u.alpha[t] = it->second;
  }
  return u;
}

Json control_to_json(const ControlSchedule& u, const NetworkGraph& g, const CommoditySet& ks) {
  Json j;
  Json cells = Json::array();
  for (const auto& c : g.cells()) cells.push_back(c.id);
  j["cells"] = cells;
  Json segs = Json::array();
  for (std::size_t t = 0; t < u.steps(); ++t) {
    if (t > 0 && u.alpha[t] == u.alpha[t - 1]) continue;
    Json s;
    s["t_start"] = t;
    for (std::size_t k = 0; k < ks.size(); ++k) {
      Json v = Json::array();
      for (std::size_t i = 0; i < g.num_cells(); ++i) v.push_back(u.alpha[t](i, k));
      s["alpha"][ks.name(CommodityId{k})] = v;
    }
    segs.push_back(s);
  }
  j["segments"] = segs;
  return j;
}

CostSpec parse_cost(const Json& j, const std::string& where) {
  if (j.is_string()) return parse_cost(Json{{"kind", j}}, where);
  const auto kind = text(member(j, "kind", where), where + ".kind");
  CostSpec c;
  if (kind == "ttt") {
    c = CostSpec::ttt();
  } else if (kind == "ttd") {
    c = CostSpec::ttd();
  } else if (kind == "piecewise") {
    c = CostSpec::piecewise(pieces(member(j, "volume_pieces", where), where + ".volume_pieces"),
                            number_or(j, "outflow_per_mile", 0.0, where));
  } else {
    fail(where + ".kind", "unknown cost '" + kind + "' (expected ttt, ttd or piecewise)");
  }
  try {
    c.validate();
  } catch (const ModelError& e) {
    fail(where, e.what());
  }
  return c;
}

Json cost_to_json(const CostSpec& c) {
  switch (c.kind) {
    case CostSpec::Kind::ttt: return Json{{"kind", "ttt"}};
    case CostSpec::Kind::ttd: return Json{{"kind", "ttd"}};
    case CostSpec::Kind::piecewise: break;
  }
  Json j;
  j["kind"] = "piecewise";
  j["volume_pieces"] = pieces_json(c.volume_pieces);
  j["outflow_per_mile"] = c.outflow_per_mile;
  return j;
}

Scenario load_scenario(const fs::path& path) {
  const Json j = read_json_file(path);
  const std::string where = path.string();
  const fs::path base = path.parent_path();

  const auto [net_json, net_where] = resolve(member(j, "network", where), base, where + ".network");
  NetworkConfig cfg = parse_network(net_json, net_where);
  const NetworkGraph graph(cfg.cells);
  const CommoditySet& ks = cfg.commodities;
  const std::size_t n = graph.num_cells(), kc = ks.size();

  if (j.contains("routing")) {
    const auto [rj, rw] = resolve(j["routing"], base, where + ".routing");
    cfg.routing = parse_routing(rj.is_object() && rj.contains("routing") ? rj["routing"] : rj, graph, ks, rw);
  }

  double h = 0.0;
  if (j.contains("step_seconds")) {
    h = number(j["step_seconds"], where + ".step_seconds") / 3600.0;
  } else {
    h = number(member(j, "step_hours", where), where + ".step_hours");
  }
  if (!(h > 0.0)) fail(where, "step must be positive");
  const std::size_t steps = count(member(j, "steps", where), where + ".steps");

  InflowProfile inflow = InflowProfile::zero(steps, n, kc);
  if (j.contains("inflow")) {
    const auto [ij, iw] = resolve(j["inflow"], base, where + ".inflow");
    const auto& a = array(ij, iw);
    for (std::size_t e = 0; e < a.size(); ++e) {
      const std::string w = field(iw, e);
      const auto cell = lookup_cell(graph, member(a[e], "cell", w), w + ".cell");
      const auto k = lookup_commodity(ks, member(a[e], "commodity", w), w + ".commodity");
      if (!graph.is_onramp(cell)) fail(w + ".cell", "inflow only enters through onramps");
      const auto& prof = array(member(a[e], "profile", w), w + ".profile");
      std::vector<std::pair<std::size_t, double>> pts;
      for (std::size_t q = 0; q < prof.size(); ++q) {
        const std::string wq = field(w + ".profile", q);
        if (!prof[q].is_array() || prof[q].size() != 2) fail(wq, "expected [t_start, rate_vph]");
        const std::size_t t0 = count(prof[q][0], wq + "[0]");
        const double rate = number(prof[q][1], wq + "[1]");
        if (rate < 0.0) fail(wq + "[1]", "negative inflow");
        if (!pts.empty() && t0 <= pts.back().first) fail(wq + "[0]", "t_start must increase");
        if (t0 >= steps && steps > 0) fail(wq + "[0]", "beyond the horizon of " + std::to_string(steps) + " steps");
        pts.emplace_back(t0, rate);
      }
      for (std::size_t q = 0; q < pts.size(); ++q) {
        const std::size_t end = q + 1 < pts.size() ? pts[q + 1].first : steps;
        for (std::size_t t = pts[q].first; t < end; ++t) inflow.rate[t](cell, k) += pts[q].second;
      }
    }
  }

  CommodityState initial(n, kc);
  if (j.contains("initial")) {
    const auto [xj, xw] = resolve(j["initial"], base, where + ".initial");
    const auto& a = array(xj, xw);
    for (std::size_t e = 0; e < a.size(); ++e) {
      const std::string w = field(xw, e);
      const auto cell = lookup_cell(graph, member(a[e], "cell", w), w + ".cell");
      const auto k = lookup_commodity(ks, member(a[e], "commodity", w), w + ".commodity");
      const double v = number(member(a[e], "volume", w), w + ".volume");
      if (v < 0.0) fail(w + ".volume", "negative volume");
      initial(cell, k) = v;
    }
  }

  ControlSchedule control = ControlSchedule::uniform(steps, n, kc);
  if (j.contains("control")) {
    const auto [cj, cw] = resolve(j["control"], base, where + ".control");
    control = parse_control(cj, graph, ks, steps, cw);
  }

  const CostSpec cost = j.contains("cost") ? parse_cost(j["cost"], where + ".cost") : CostSpec::ttt();

  RoutingTable table;
  try {
    table = RoutingTable(cfg.routing, graph);
  } catch (const ModelError& e) {
    fail(where + ".routing", e.what());
  }
  Scenario s{graph, ks, cfg.fd, table, std::move(inflow), std::move(control), std::move(initial),
             h, steps, cost};
  try {
    s.validate();
  } catch (const ModelError& e) {
    fail(where, e.what());
  }
  return s;
}

Json residuals_to_json(const RelaxationResiduals& r) {
  return Json{{"initial", r.initial},   {"dynamics", r.dynamics}, {"demand", r.demand},
              {"supply", r.supply},     {"splitting", r.splitting},
              {"nonnegativity", r.nonnegativity}, {"max", r.max()}};
}

Json tightness_to_json(const TightnessReport& r) {
  Json j;
  j["pass"] = r.pass;
  j["tolerance"] = r.tolerance;
  j["max_state_deviation"] = r.max_state_deviation;
  j["max_flow_deviation"] = r.max_flow_deviation;
  j["min_gamma"] = r.min_gamma;
  j["gamma_deficit"] = r.gamma_deficit;
  j["simulated_cost"] = r.simulated_cost;
  j["relaxed_cost"] = r.relaxed_cost;
  j["demand_violated"] = r.demand_violated;
  if (!r.failure.empty()) j["failure"] = r.failure;
  return j;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& tr, const NetworkGraph& g,
                          const CommoditySet& ks) {
  out << "t,cell,commodity,x,z,gamma\n";
  for (std::size_t t = 0; t < tr.states.size(); ++t) {
    for (std::size_t i = 0; i < g.num_cells(); ++i) {
      for (std::size_t k = 0; k < ks.size(); ++k) {
        out << t << ',' << g.cells()[i].id << ',' << ks.name(CommodityId{k}) << ',';
        write_number(out, tr.states[t](i, k));
        out << ',';
        if (t < tr.flows.size()) {
          write_number(out, tr.flows[t].outflow(i, k));
          out << ',';
          write_number(out, tr.flows[t].gamma[i]);
        } else {
          out << ',';
        }
        out << '\n';
      }
    }
  }
}

void write_flows_csv(std::ostream& out, const Trajectory& tr, const NetworkGraph& g,
                     const CommoditySet& ks) {
  out << "t,from,to,commodity,f\n";
  const auto& pairs = g.adjacency();
  const std::size_t kc = ks.size();
  std::vector<bool> used(pairs.size() * kc, false);
  for (const auto& fl : tr.flows) {
    for (std::size_t q = 0; q < used.size(); ++q) used[q] = used[q] || fl.pair_flow[q] != 0.0;
  }
  for (std::size_t t = 0; t < tr.flows.size(); ++t) {
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (std::size_t k = 0; k < kc; ++k) {
        if (!used[p * kc + k]) continue;
        out << t << ',' << g.cell(pairs[p].first).id << ',' << g.cell(pairs[p].second).id << ','
            << ks.name(CommodityId{k}) << ',';
        write_number(out, tr.flows[t].flow(p, k, kc));
        out << '\n';
      }
    }
  }
}

void write_totals_csv(std::ostream& out, const std::vector<double>& totals) {
  out << "t,total_volume\n";
  for (std::size_t t = 0; t < totals.size(); ++t) {
    out << t << ',';
    write_number(out, totals[t]);
    out << '\n';
  }
}

void write_relaxation_csv(std::ostream& out, const RelaxationPoint& p, const NetworkGraph& g,
                          const CommoditySet& ks) {
  out << "t,cell,commodity,x,z\n";
  for (std::size_t t = 0; t < p.x.size(); ++t) {
    for (std::size_t i = 0; i < g.num_cells(); ++i) {
      for (std::size_t k = 0; k < ks.size(); ++k) {
        out << t << ',' << g.cells()[i].id << ',' << ks.name(CommodityId{k}) << ',';
        write_number(out, p.x[t](i, k));
        out << ',';
        if (t < p.z.size()) write_number(out, p.z[t](i, k));
        out << '\n';
      }
    }
  }
}

}  // namespace mcfnc
