// SPDX-License-Identifier: Apache-2.0

#include "nasforge/analyzer.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <sstream>

#include "nasforge/errors.hpp"
#include "nasforge/serde.hpp"

namespace nasforge::analyzer {
namespace {

ir::IbnSpec make_block(ir::IbnVariant variant, const ir::TensorShape& shape,
                       int k, const ir::Rational& m, int n, int p, int g) {
  ir::IbnSpec spec;
  spec.variant = variant;
  spec.in_c = shape.c;
  spec.out_c = shape.c;
  spec.k = k;
  spec.stride = 1;
  spec.expansion = m;
  spec.split_n = n;
  spec.split_p = p;
  spec.groups = g;
  spec.use_residual = false;
  return spec;
}

SweepPoint measure(const ir::IbnSpec& spec, const ir::TensorShape& shape,
                   const cost::AcceleratorConfig& cfg) {
  ir::PrimitiveGraph g = ir::lower_ibn(spec, shape.h, shape.w);
  cost::ModelMetrics mm = cost::graph_metrics(g, cfg);
  SweepPoint pt;
  pt.variant = spec.variant;
  pt.shape = shape;
  pt.k = spec.k;
  pt.m = spec.expansion;
  pt.split_n = spec.split_n;
  pt.split_p = spec.split_p;
  pt.group_count = spec.groups;
  if (spec.groups > 0) {
    std::uint64_t gc_in = static_cast<std::uint64_t>(spec.in_c);
    if (spec.variant == ir::IbnVariant::kGeneralizedGc)
      gc_in *= static_cast<std::uint64_t>(spec.split_n);
    pt.group_size = static_cast<int>(gc_in / spec.groups);
  }
  pt.params = mm.totals.params;
  pt.macs = mm.totals.macs;
  pt.latency_us = mm.totals.latency_us;
  pt.utilization = mm.totals.utilization;
  pt.energy_mj = mm.totals.energy_mj;
  return pt;
}

// Group counts dividing both grouped-stage channel counts, smallest first.
std::vector<int> group_counts(std::uint64_t gc_in, std::uint64_t gc_out,
                              int min_group_size) {
  std::vector<int> out;
  for (std::uint64_t g = 1; g <= gc_in; ++g) {
    if (gc_in % g != 0 || gc_out % g != 0) continue;
    if (gc_in / g < static_cast<std::uint64_t>(min_group_size)) break;
    out.push_back(static_cast<int>(g));
  }
  return out;
}

std::string shape_text(const ir::TensorShape& s) {
  std::ostringstream os;
  os << s.h << "x" << s.w << "x" << s.c;
  return os.str();
}

std::int64_t parse_csv_int(const std::string& field, std::size_t line) {
  std::size_t used = 0;
  std::int64_t v = 0;
  try {
    v = std::stoll(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != field.size() || field.empty())
    throw ValidationError("csv line " + std::to_string(line) +
                          ": bad integer '" + field + "'");
  return v;
}

double parse_csv_real(const std::string& field, std::size_t line) {
  const char* begin = field.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end != begin + field.size() || field.empty())
    throw ValidationError("csv line " + std::to_string(line) +
                          ": bad number '" + field + "'");
  return v;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::vector<SweepPoint> run_block_sweep(const SweepRequest& req,
                                        const cost::AcceleratorConfig& cfg) {
  cfg.validate();
  if (req.shapes.empty() || req.variants.empty() || req.kernels.empty() ||
      req.expansions.empty())
    throw ValidationError("block sweep: every menu needs at least one entry");
  if (req.min_group_size < 1)
    throw ValidationError("block sweep: min_group_size must be positive");

  std::vector<SweepPoint> table;
  for (const ir::TensorShape& shape : req.shapes) {
    if (shape.h < 1 || shape.w < 1 || shape.c < 1)
      throw ValidationError("block sweep: bad shape " + shape_text(shape));
    for (int k : req.kernels) {
      for (const ir::Rational& m : req.expansions) {
        ir::IbnSpec base_spec =
            make_block(ir::IbnVariant::kDepthwise, shape, k, m, 0, 0, 0);
        {
          std::vector<ir::Violation> v =
              ir::validate_block(base_spec, req.min_group_size);
          if (!v.empty())
            throw ValidationError("block sweep: no depthwise baseline at " +
                                  shape_text(shape) + " k=" +
                                  std::to_string(k) + " m=" + ir::to_string(m) +
                                  ": " + v.front().message);
        }
        SweepPoint base = measure(base_spec, shape, cfg);

        auto push = [&](const ir::IbnSpec& spec) {
          std::vector<ir::Violation> v =
              ir::validate_block(spec, req.min_group_size);
          if (!v.empty()) return;
          SweepPoint pt = measure(spec, shape, cfg);
          pt.param_ratio = static_cast<double>(pt.params) /
                           static_cast<double>(base.params);
          pt.latency_ratio = pt.latency_us / base.latency_us;
          table.push_back(pt);
        };

        const std::uint64_t out_ch =
            static_cast<std::uint64_t>(m.times_exact(shape.c).value());
        for (ir::IbnVariant variant : req.variants) {
          switch (variant) {
            case ir::IbnVariant::kDepthwise: {
              SweepPoint pt = base;
              table.push_back(pt);
              break;
            }
            case ir::IbnVariant::kFused:
              push(make_block(variant, shape, k, m, 0, 0, 0));
              break;
            case ir::IbnVariant::kGc:
              for (int g : group_counts(static_cast<std::uint64_t>(shape.c),
                                        out_ch, req.min_group_size))
                push(make_block(variant, shape, k, m, 0, 0, g));
              break;
            case ir::IbnVariant::kGeneralizedGc:
              for (auto [n, p] : space::expansion_splits(m)) {
                std::uint64_t gc_in =
                    static_cast<std::uint64_t>(n) *
                    static_cast<std::uint64_t>(shape.c);
                for (int g : group_counts(gc_in, out_ch, req.min_group_size))
                  push(make_block(variant, shape, k, m, n, p, g));
              }
              break;
          }
        }
      }
    }
  }
  return table;
}

SweepRequest default_sweep_request() {
  SweepRequest req;
  req.shapes = {{14, 14, 64}, {14, 14, 160}};
  req.variants = {ir::IbnVariant::kDepthwise, ir::IbnVariant::kFused,
                  ir::IbnVariant::kGeneralizedGc, ir::IbnVariant::kGc};
  req.kernels = {3, 5};
  req.expansions = {{3, 1}, {6, 1}};
  req.min_group_size = space::kMinGroupSize;
  return req;
}

std::vector<ir::TensorShape> filter_regimes(
    const std::vector<SweepPoint>& table) {
  std::vector<ir::TensorShape> regimes;
  for (const SweepPoint& pt : table) {
    bool seen = false;
    for (const ir::TensorShape& r : regimes)
      if (r == pt.shape) { seen = true; break; }
    if (!seen) regimes.push_back(pt.shape);
  }
  return regimes;
}

std::vector<space::FilterRule> recommend_filters(
    const std::vector<SweepPoint>& table, double latency_margin) {
  if (latency_margin < 1.0)
    throw ValidationError("latency margin must be >= 1.0");
  std::vector<ir::TensorShape> regimes = filter_regimes(table);
  std::vector<space::FilterRule> rules;

  for (std::size_t ri = 0; ri < regimes.size(); ++ri) {
    std::vector<const SweepPoint*> rows;
    for (const SweepPoint& pt : table)
      if (pt.shape == regimes[ri]) rows.push_back(&pt);

    std::vector<ir::IbnVariant> variants;
    for (const SweepPoint* pt : rows) {
      bool seen = false;
      for (ir::IbnVariant v : variants)
        if (v == pt->variant) { seen = true; break; }
      if (!seen) variants.push_back(pt->variant);
    }

    for (ir::IbnVariant v : variants) {
      std::size_t owned = 0;
      bool all_beaten = true;
      double worst_gap = 0.0;
      for (const SweepPoint* r : rows) {
        if (r->variant != v) continue;
        ++owned;
        bool beaten = false;
        double best_gap = 0.0;
        for (const SweepPoint* o : rows) {
          if (o->variant == v) continue;
          if (o->params >= r->params &&
              r->latency_us > latency_margin * o->latency_us) {
            beaten = true;
            best_gap = std::max(best_gap, r->latency_us / o->latency_us);
          }
        }
        if (!beaten) { all_beaten = false; break; }
        if (worst_gap == 0.0 || best_gap < worst_gap) worst_gap = best_gap;
      }
      if (owned == 0 || !all_beaten) continue;
      space::FilterRule rule;
      rule.block_index = static_cast<int>(ri);
      rule.field = "variant";
      rule.value = ir::ibn_variant_name(v);
      std::ostringstream note;
      note << "at " << shape_text(regimes[ri]) << " every " << rule.value
           << " row is off the latency/params front (latency >= "
           << serde::format_real(worst_gap) << "x a row with >= params)";
      rule.note = note.str();
      rules.push_back(std::move(rule));
    }
  }
  return rules;
}

// ------------------------------------------------------------------ CSV --

static const char kCsvHeader[] =
    "variant,h,w,c,k,m,n,p,g,group_size,params,macs,latency_us,"
    "utilization,energy_mj,param_ratio,latency_ratio";

std::string sweep_to_csv(const std::vector<SweepPoint>& table) {
  std::ostringstream os;
  os << kCsvHeader << "\n";
  for (const SweepPoint& pt : table) {
    os << ir::ibn_variant_name(pt.variant) << "," << pt.shape.h << ","
       << pt.shape.w << "," << pt.shape.c << "," << pt.k << ","
       << ir::to_string(pt.m) << "," << pt.split_n << "," << pt.split_p << ","
       << pt.group_count << "," << pt.group_size << "," << pt.params << ","
       << pt.macs << "," << serde::format_real(pt.latency_us) << ","
       << serde::format_real(pt.utilization) << ","
       << serde::format_real(pt.energy_mj) << ","
       << serde::format_real(pt.param_ratio) << ","
       << serde::format_real(pt.latency_ratio) << "\n";
  }
  return os.str();
}

std::vector<SweepPoint> sweep_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<SweepPoint> table;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      if (line != kCsvHeader)
        throw ValidationError("csv line 1: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    if (fields.size() != 17)
      throw ValidationError("csv line " + std::to_string(lineno) +
                            ": expected 17 fields, got " +
                            std::to_string(fields.size()));
    SweepPoint pt;
    auto variant = ir::parse_ibn_variant(fields[0]);
    if (!variant)
      throw ValidationError("csv line " + std::to_string(lineno) +
                            ": unknown variant '" + fields[0] + "'");
    pt.variant = *variant;
    pt.shape.h = static_cast<int>(parse_csv_int(fields[1], lineno));
    pt.shape.w = static_cast<int>(parse_csv_int(fields[2], lineno));
    pt.shape.c = static_cast<int>(parse_csv_int(fields[3], lineno));
    pt.k = static_cast<int>(parse_csv_int(fields[4], lineno));
    auto m = ir::parse_rational(fields[5]);
    if (!m)
      throw ValidationError("csv line " + std::to_string(lineno) +
                            ": bad expansion '" + fields[5] + "'");
    pt.m = *m;
    pt.split_n = static_cast<int>(parse_csv_int(fields[6], lineno));
    pt.split_p = static_cast<int>(parse_csv_int(fields[7], lineno));
    pt.group_count = static_cast<int>(parse_csv_int(fields[8], lineno));
    pt.group_size = static_cast<int>(parse_csv_int(fields[9], lineno));
    pt.params = static_cast<std::uint64_t>(parse_csv_int(fields[10], lineno));
    pt.macs = static_cast<std::uint64_t>(parse_csv_int(fields[11], lineno));
    pt.latency_us = parse_csv_real(fields[12], lineno);
    pt.utilization = parse_csv_real(fields[13], lineno);
    pt.energy_mj = parse_csv_real(fields[14], lineno);
    pt.param_ratio = parse_csv_real(fields[15], lineno);
    pt.latency_ratio = parse_csv_real(fields[16], lineno);
    table.push_back(pt);
  }
  return table;
}

// ------------------------------------------------------------------ SVG --

std::string scatter_svg(const std::vector<ScatterPoint>& points,
                        const std::string& x_label,
                        const std::string& y_label) {
  const double width = 640, height = 480;
  const double left = 70, right = 20, top = 20, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
  if (!points.empty()) {
    xmin = xmax = points[0].x;
    ymin = ymax = points[0].y;
    for (const ScatterPoint& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  if (xmax == xmin) { xmin -= 1.0; xmax += 1.0; }
  if (ymax == ymin) { ymin -= 1.0; ymax += 1.0; }
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
  auto sy = [&](double y) {
    return top + (1.0 - (y - ymin) / (ymax - ymin)) * plot_h;
  };
  auto num = [](double v) { return serde::format_real(v); };

  // Nondominated under (min x, max y); quadratic scan, tables are small.
  std::vector<const ScatterPoint*> front;
  for (const ScatterPoint& p : points) {
    bool dominated = false;
    for (const ScatterPoint& q : points) {
      if (q.x <= p.x && q.y >= p.y && (q.x < p.x || q.y > p.y)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(&p);
  }
  std::sort(front.begin(), front.end(),
            [](const ScatterPoint* a, const ScatterPoint* b) {
              if (a->x != b->x) return a->x < b->x;
              return a->y > b->y;
            });
  front.erase(std::unique(front.begin(), front.end(),
                          [](const ScatterPoint* a, const ScatterPoint* b) {
                            return a->x == b->x && a->y == b->y;
                          }),
              front.end());

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
        "height=\"480\" viewBox=\"0 0 640 480\">\n";
  os << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  os << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + plot_h)
     << "\" x2=\"" << num(left + plot_w) << "\" y2=\"" << num(top + plot_h)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\""
     << num(left) << "\" y2=\"" << num(top + plot_h)
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(height - 12)
     << "\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(x_label)
     << "</text>\n";
  os << "<text x=\"16\" y=\"" << num(top + plot_h / 2)
     << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 16 "
     << num(top + plot_h / 2) << ")\">" << xml_escape(y_label) << "</text>\n";
  os << "<text x=\"" << num(left) << "\" y=\"" << num(height - 32)
     << "\" text-anchor=\"middle\" font-size=\"11\">" << num(xmin)
     << "</text>\n";
  os << "<text x=\"" << num(left + plot_w) << "\" y=\"" << num(height - 32)
     << "\" text-anchor=\"middle\" font-size=\"11\">" << num(xmax)
     << "</text>\n";
  os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(top + plot_h)
     << "\" text-anchor=\"end\" font-size=\"11\">" << num(ymin)
     << "</text>\n";
  os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(top + 4)
     << "\" text-anchor=\"end\" font-size=\"11\">" << num(ymax)
     << "</text>\n";

  if (front.size() > 1) {
    os << "<polyline fill=\"none\" stroke=\"#cc3333\" stroke-width=\"1.5\" "
          "points=\"";
    for (std::size_t i = 0; i < front.size(); ++i) {
      if (i) os << " ";
      os << num(sx(front[i]->x)) << "," << num(sy(front[i]->y));
    }
    os << "\"/>\n";
  }
  for (const ScatterPoint& p : points) {
    os << "<circle cx=\"" << num(sx(p.x)) << "\" cy=\"" << num(sy(p.y))
       << "\" r=\"3\" fill=\"#3366cc\">";
    if (!p.label.empty()) os << "<title>" << xml_escape(p.label) << "</title>";
    os << "</circle>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace nasforge::analyzer
