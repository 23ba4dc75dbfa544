#include "thermoprop/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace thermoprop {

namespace {

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const Json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Json mat_to_json(const Mat& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (int j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Mat mat_from_json(const Json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  return m;
}

}  // namespace

void require_keys(const Json& j, const std::vector<std::string>& allowed,
                  const std::string& context) {
  if (!j.is_object()) throw SpecError(context + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw SpecError(context + ": unknown key '" + key + "'");
}

Json spec_to_json(const SubstrateSpec& spec) {
  Json j;
  j["partition"] = {{"input_dim", spec.partition.input_dim},
                    {"hidden_dim", spec.partition.hidden_dim},
                    {"output_dim", spec.partition.output_dim},
                    {"module_sizes", spec.partition.module_sizes}};
  j["base"] = {{"a", vec_to_json(spec.base.stiffness)},
               {"b0", vec_to_json(spec.base.bias)},
               {"kappa", vec_to_json(spec.base.quartic)}};
  Json cs = Json::array();
  for (const auto& c : spec.couplings)
    cs.push_back({{"m", c.source_module},
                  {"mp", c.target_module},
                  {"u", mat_to_json(c.u)},
                  {"v", mat_to_json(c.v)}});
  j["couplings"] = std::move(cs);
  j["lambda_floor"] = spec.lambda_floor;
  j["train_v"] = spec.train_v;
  j["trainable_bias"] = spec.trainable_bias;
  return j;
}

SubstrateSpec spec_from_json(const Json& j) {
  require_keys(j, {"partition", "base", "couplings", "lambda_floor", "train_v",
                   "trainable_bias"},
               "spec");
  const Json& jp = j.at("partition");
  require_keys(jp, {"input_dim", "hidden_dim", "output_dim", "module_sizes"},
               "spec.partition");
  BlockPartition p;
  p.input_dim = jp.at("input_dim").get<int>();
  p.hidden_dim = jp.at("hidden_dim").get<int>();
  p.output_dim = jp.at("output_dim").get<int>();
  p.module_sizes = jp.at("module_sizes").get<std::vector<int>>();

  const Json& jb = j.at("base");
  require_keys(jb, {"a", "b0", "kappa"}, "spec.base");
  BaseEnergy base;
  base.stiffness = vec_from_json(jb.at("a"));
  base.bias = vec_from_json(jb.at("b0"));
  base.quartic = vec_from_json(jb.at("kappa"));

  std::vector<LowRankCoupling> couplings;
  for (const Json& jc : j.at("couplings")) {
    const int m = jc.at("m").get<int>();
    const int mp = jc.at("mp").get<int>();
    if (jc.contains("seed")) {
      require_keys(jc, {"m", "mp", "k", "seed", "gain"}, "spec.coupling");
      const double gain = jc.contains("gain") ? jc.at("gain").get<double>() : 1.0;
      couplings.push_back(
          seeded_coupling(p, m, mp, jc.at("k").get<int>(),
                          jc.at("seed").get<std::uint64_t>(), gain));
    } else {
      require_keys(jc, {"m", "mp", "u", "v"}, "spec.coupling");
      LowRankCoupling c;
      c.source_module = m;
      c.target_module = mp;
      c.u = mat_from_json(jc.at("u"));
      c.v = mat_from_json(jc.at("v"));
      couplings.push_back(std::move(c));
    }
  }

  const double floor =
      j.contains("lambda_floor") ? j.at("lambda_floor").get<double>() : 0.1;
  const bool train_v = j.contains("train_v") ? j.at("train_v").get<bool>() : true;
  std::vector<int> tb;
  if (j.contains("trainable_bias"))
    tb = j.at("trainable_bias").get<std::vector<int>>();
  return SubstrateSpec::make(p, base, std::move(couplings), floor, train_v,
                             std::move(tb));
}

std::string config_hash(const Json& j) {
  const std::string canon = j.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

void write_records_csv(const std::vector<SweepRecord>& records,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SpecError("cannot open output file: " + path);
  out << "experiment_id,beta,seed,metric_name,metric_value,config_hash\n";
  for (const auto& r : records)
    out << r.experiment_id << ',' << format_double(r.beta) << ',' << r.seed
        << ',' << r.metric_name << ',' << format_double(r.metric_value) << ','
        << r.config_hash << '\n';
}

Json records_to_json(const std::vector<SweepRecord>& records) {
  Json arr = Json::array();
  for (const auto& r : records)
    arr.push_back({{"experiment_id", r.experiment_id},
                   {"beta", r.beta},
                   {"seed", r.seed},
                   {"metric_name", r.metric_name},
                   {"metric_value", r.metric_value},
                   {"config_hash", r.config_hash}});
  return arr;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw SpecError("cannot open output file: " + path);
  out << content;
}

std::string render_svg_plot(const std::vector<PlotSeries>& series,
                            const std::string& title, bool log_x, bool log_y) {
  const int w = 640, h = 480, margin = 60;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, ty(s.y[i]));
      ymax = std::max(ymax, ty(s.y[i]));
    }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto px = [&](double v) {
    return margin + (tx(v) - xmin) / (xmax - xmin) * (w - 2 * margin);
  };
  auto py = [&](double v) {
    return h - margin - (ty(v) - ymin) / (ymax - ymin) * (h - 2 * margin);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::string svg;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns='http://www.w3.org/2000/svg' width='%d' height='%d'>\n",
                w, h);
  svg += buf;
  std::snprintf(buf, sizeof(buf),
                "<rect width='%d' height='%d' fill='white'/>\n<text x='%d' "
                "y='24' font-size='14' text-anchor='middle'>",
                w, h, w / 2);
  svg += buf;
  svg += title + "</text>\n";
  std::snprintf(buf, sizeof(buf),
                "<rect x='%d' y='%d' width='%d' height='%d' fill='none' "
                "stroke='black'/>\n",
                margin, margin, w - 2 * margin, h - 2 * margin);
  svg += buf;
  int ci = 0;
  for (const auto& s : series) {
    const char* color = colors[ci % 4];
    svg += "<polyline fill='none' stroke='";
    svg += color;
    svg += "' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", px(s.x[i]), py(s.y[i]));
      svg += buf;
    }
    svg += "'/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf),
                    "<circle cx='%.1f' cy='%.1f' r='3' fill='%s'/>\n",
                    px(s.x[i]), py(s.y[i]), color);
      svg += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x='%d' y='%d' font-size='12' fill='%s'>",
                  margin + 8, margin + 16 + 16 * ci, color);
    svg += buf;
    svg += s.label + "</text>\n";
    ++ci;
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace thermoprop
