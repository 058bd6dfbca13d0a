#include "dnas/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dnas/genotype.hpp"

namespace dnas {

std::string read_text_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path))
    throw std::runtime_error(path + " is not a readable file");
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << content;
  if (!f) throw std::runtime_error("failed writing " + path);
}

int CsvTable::col(const std::string& name) const {
  for (size_t i = 0; i < cols.size(); ++i)
    if (cols[i] == name) return static_cast<int>(i);
  return -1;
}

std::optional<double> CsvTable::cell(size_t row, int c) const {
  if (c < 0 || row >= rows.size() || static_cast<size_t>(c) >= rows[row].size())
    return std::nullopt;
  return rows[row][c];
}

namespace {

std::vector<std::string> split_comma(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

CsvTable parse_history_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.cols = split_comma(line);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split_comma(line);
    if (cells.size() != t.cols.size())
      throw std::runtime_error("csv line " + std::to_string(lineno) + ": wrong cell count");
    std::vector<std::optional<double>> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) {
      if (c.empty()) {
        row.push_back(std::nullopt);
        continue;
      }
      size_t pos = 0;
      double v;
      try {
        v = std::stod(c, &pos);
      } catch (const std::exception&) {
        throw std::runtime_error("csv line " + std::to_string(lineno) + ": bad number " + c);
      }
      if (pos != c.size())
        throw std::runtime_error("csv line " + std::to_string(lineno) + ": bad number " + c);
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

const char* kPalette[8] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::string fimt_timeline_svg(const CsvTable& t) {
  int cs = t.col("step"), ce = t.col("ewma"), ch = t.col("h"), cf = t.col("fired");
  if (cs < 0 || ce < 0 || cf < 0)
    throw std::runtime_error("timeline: csv lacks step/ewma/fired columns");
  const double W = 960, H = 320, L = 64, R = 20, T = 34, B = 44;
  size_t n = t.rows.size();

  double max_step = 1;
  double lo = 1e300, hi = -1e300;
  auto fold = [&](std::optional<double> v) {
    if (!v) return;
    double lg = std::log10(std::max(*v, 1e-12));
    lo = std::min(lo, lg);
    hi = std::max(hi, lg);
  };
  for (size_t i = 0; i < n; ++i) {
    if (auto s = t.cell(i, cs)) max_step = std::max(max_step, *s);
    fold(t.cell(i, ce));
    fold(t.cell(i, ch));
  }
  if (lo > hi) {
    lo = -1;
    hi = 1;
  }
  if (hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto X = [&](double s) { return L + (W - L - R) * (s / max_step); };
  auto Y = [&](double v) {
    double lg = std::log10(std::max(v, 1e-12));
    return T + (H - T - B) * (1.0 - (lg - lo) / (hi - lo));
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
         "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\">\n";
  svg += "<rect width=\"" + num(W) + "\" height=\"" + num(H) + "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(L) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
         "gradient information average vs firing threshold</text>\n";

  // frame and ticks
  svg += "<rect x=\"" + num(L) + "\" y=\"" + num(T) + "\" width=\"" + num(W - L - R) +
         "\" height=\"" + num(H - T - B) + "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    double s = max_step * k / 4.0;
    svg += "<text x=\"" + num(X(s)) + "\" y=\"" + num(H - B + 16) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" +
           std::to_string(static_cast<long>(s + 0.5)) + "</text>\n";
  }
  int d0 = static_cast<int>(std::ceil(lo)), d1 = static_cast<int>(std::floor(hi));
  for (int d = d0; d <= d1; ++d) {
    double y = T + (H - T - B) * (1.0 - (d - lo) / (hi - lo));
    svg += "<line x1=\"" + num(L) + "\" y1=\"" + num(y) + "\" x2=\"" + num(W - R) + "\" y2=\"" +
           num(y) + "\" stroke=\"#eeeeee\"/>\n";
    svg += "<text x=\"" + num(L - 6) + "\" y=\"" + num(y + 4) +
           "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">1e" +
           std::to_string(d) + "</text>\n";
  }

  auto polyline = [&](int col, const char* cls, const char* stroke, const char* dash) {
    std::string pts;
    for (size_t i = 0; i < n; ++i) {
      auto s = t.cell(i, cs);
      auto v = t.cell(i, col);
      if (!s || !v) continue;
      pts += num(X(*s)) + "," + num(Y(*v)) + " ";
    }
    if (pts.empty()) return;
    svg += "<polyline class=\"" + std::string(cls) + "\" fill=\"none\" stroke=\"" + stroke +
           "\" stroke-width=\"1.2\"";
    if (dash) svg += " stroke-dasharray=\"" + std::string(dash) + "\"";
    svg += " points=\"" + pts + "\"/>\n";
  };
  polyline(ce, "ewma", "#1f77b4", nullptr);
  if (ch >= 0) polyline(ch, "threshold", "#d62728", "5,3");

  for (size_t i = 0; i < n; ++i) {
    auto s = t.cell(i, cs);
    auto f = t.cell(i, cf);
    if (!s || !f || *f == 0.0) continue;
    svg += "<circle class=\"fire\" cx=\"" + num(X(*s)) + "\" cy=\"" + num(H - B - 4) +
           "\" r=\"2.5\" fill=\"#2ca02c\"/>\n";
  }

  double lx = W - R - 250;
  svg += "<line x1=\"" + num(lx) + "\" y1=\"14\" x2=\"" + num(lx + 24) +
         "\" y2=\"14\" stroke=\"#1f77b4\" stroke-width=\"1.2\"/>"
         "<text x=\"" + num(lx + 30) + "\" y=\"18\" font-family=\"sans-serif\" font-size=\"11\">"
         "average</text>\n";
  svg += "<line x1=\"" + num(lx + 100) + "\" y1=\"14\" x2=\"" + num(lx + 124) +
         "\" y2=\"14\" stroke=\"#d62728\" stroke-width=\"1.2\" stroke-dasharray=\"5,3\"/>"
         "<text x=\"" + num(lx + 130) + "\" y=\"18\" font-family=\"sans-serif\" font-size=\"11\">"
         "threshold</text>\n";
  svg += "<circle cx=\"" + num(lx + 210) + "\" cy=\"14\" r=\"2.5\" fill=\"#2ca02c\"/>"
         "<text x=\"" + num(lx + 218) + "\" y=\"18\" font-family=\"sans-serif\" font-size=\"11\">"
         "fired</text>\n";
  svg += "</svg>\n";
  return svg;
}

std::string alpha_trajectory_svg(const std::vector<AlphaSnapshot>& snaps_in) {
  if (snaps_in.empty()) throw std::runtime_error("trajectory: no snapshots");
  std::vector<AlphaSnapshot> snaps = snaps_in;
  std::sort(snaps.begin(), snaps.end(),
            [](const AlphaSnapshot& a, const AlphaSnapshot& b) { return a.epoch < b.epoch; });
  const AlphaSnapshot& first = snaps.front();
  int I = first.num_inputs, N = first.num_states;
  int P = static_cast<int>(first.ops.size());
  int Tn = static_cast<int>(first.activated.size());
  for (const AlphaSnapshot& s : snaps) {
    if (s.num_inputs != I || s.num_states != N || static_cast<int>(s.ops.size()) != P ||
        static_cast<int>(s.activated.size()) != Tn)
      throw std::runtime_error("trajectory: snapshots disagree on layout");
  }
  int ep0 = snaps.front().epoch, ep1 = snaps.back().epoch;
  if (ep1 == ep0) ep1 = ep0 + 1;

  const double pw = 170, ph = 110, gapx = 14, gapy = 18;
  const double L = 56, top0 = 54;
  int max_cols = I + N - 1;
  double block_h = 26 + N * (ph + gapy);
  double W = L + max_cols * (pw + gapx) + 16;
  double H = top0 + Tn * block_h + 10;

  auto edge_of = [&](int state, int src) {
    int e = 0;
    for (int i = 0; i < state; ++i) e += I + i;
    return e + src;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
         "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\">\n";
  svg += "<rect width=\"" + num(W) + "\" height=\"" + num(H) + "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(L) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
         "architecture weight trajectories (activated, by epoch)</text>\n";

  double lx = L;
  for (int p = 0; p < P; ++p) {
    svg += "<line x1=\"" + num(lx) + "\" y1=\"34\" x2=\"" + num(lx + 18) + "\" y2=\"34\" stroke=\"" +
           kPalette[p % 8] + "\" stroke-width=\"1.4\"/>";
    std::string name = op_name(first.ops[p]);
    svg += "<text x=\"" + num(lx + 22) + "\" y=\"38\" font-family=\"sans-serif\" font-size=\"11\">" +
           name + "</text>\n";
    lx += 34 + 7.0 * name.size();
  }

  std::vector<std::string> tnames = cell_type_names(Tn);
  for (int tc = 0; tc < Tn; ++tc) {
    double by = top0 + tc * block_h;
    svg += "<text x=\"" + num(L) + "\" y=\"" + num(by + 12) +
           "\" font-family=\"sans-serif\" font-size=\"13\" font-weight=\"bold\">cell type: " +
           tnames[tc] + "</text>\n";
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < I + i; ++j) {
        double px = L + j * (pw + gapx);
        double py = by + 26 + i * (ph + gapy);
        svg += "<rect x=\"" + num(px) + "\" y=\"" + num(py) + "\" width=\"" + num(pw) +
               "\" height=\"" + num(ph) + "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
        std::string src = j < I ? "in" + std::to_string(j) : "s" + std::to_string(j - I);
        svg += "<text x=\"" + num(px + 4) + "\" y=\"" + num(py + 12) +
               "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"#555555\">" + src +
               "&#8594;s" + std::to_string(i) + "</text>\n";
        int e = edge_of(i, j);
        for (int p = 0; p < P; ++p) {
          std::string pts;
          for (const AlphaSnapshot& s : snaps) {
            double v = s.activated[tc].at(e, p);
            v = std::min(1.0, std::max(0.0, v));
            double x = px + pw * (static_cast<double>(s.epoch - ep0) / (ep1 - ep0));
            double y = py + ph * (1.0 - v);
            pts += num(x) + "," + num(y) + " ";
          }
          svg += "<polyline class=\"op-" + std::string(op_name(first.ops[p])) +
                 "\" fill=\"none\" stroke=\"" + kPalette[p % 8] +
                 "\" stroke-width=\"1.2\" points=\"" + pts + "\"/>\n";
        }
        if (j == 0) {
          svg += "<text x=\"" + num(px - 4) + "\" y=\"" + num(py + 8) +
                 "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"end\">1</text>\n";
          svg += "<text x=\"" + num(px - 4) + "\" y=\"" + num(py + ph) +
                 "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"end\">0</text>\n";
        }
        if (i == N - 1) {
          svg += "<text x=\"" + num(px) + "\" y=\"" + num(py + ph + 12) +
                 "\" font-family=\"sans-serif\" font-size=\"9\">" + std::to_string(ep0) +
                 "</text>\n";
          svg += "<text x=\"" + num(px + pw) + "\" y=\"" + num(py + ph + 12) +
                 "\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"end\">" +
                 std::to_string(ep1) + "</text>\n";
        }
      }
    }
  }
  svg += "</svg>\n";
  return svg;
}

std::vector<AlphaSnapshot> load_snapshot_dir(const std::string& dir) {
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.rfind("alpha_ep", 0) == 0 && name.size() > 5 &&
        name.compare(name.size() - 5, 5, ".json") == 0)
      names.push_back(name);
  }
  if (names.empty()) throw std::runtime_error("no alpha_ep*.json files in " + dir);
  std::sort(names.begin(), names.end());
  std::vector<AlphaSnapshot> out;
  for (const std::string& n : names) out.push_back(parse_snapshot(read_text_file(dir + "/" + n)));
  return out;
}

}  // namespace dnas
