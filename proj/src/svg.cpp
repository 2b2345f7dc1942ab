#include "distreal/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace distreal {

namespace {

constexpr int kW = 860, kH = 520;
constexpr int kL = 70, kR = 830, kT = 30, kB = 470;  // plot area

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Scale {
    double x0, x1, y0, y1;
    double px(double x) const { return kL + (x - x0) / (x1 - x0) * (kR - kL); }
    double py(double y) const { return kB - (y - y0) / (y1 - y0) * (kB - kT); }
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void axes(std::ofstream& os, const Scale& s, const std::string& xlabel,
          const std::string& ylabel) {
    os << "<line x1='" << kL << "' y1='" << kB << "' x2='" << kR << "' y2='" << kB
       << "' stroke='black'/>\n";
    os << "<line x1='" << kL << "' y1='" << kT << "' x2='" << kL << "' y2='" << kB
       << "' stroke='black'/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = s.x0 + (s.x1 - s.x0) * i / 5.0;
        const double fy = s.y0 + (s.y1 - s.y0) * i / 5.0;
        os << "<text x='" << s.px(fx) << "' y='" << kB + 18
           << "' font-size='11' text-anchor='middle'>" << fmt(fx) << "</text>\n";
        os << "<text x='" << kL - 8 << "' y='" << s.py(fy) + 4
           << "' font-size='11' text-anchor='end'>" << fmt(fy) << "</text>\n";
    }
    os << "<text x='" << (kL + kR) / 2 << "' y='" << kH - 8
       << "' font-size='13' text-anchor='middle'>" << xlabel << "</text>\n";
    os << "<text x='16' y='" << (kT + kB) / 2
       << "' font-size='13' text-anchor='middle' transform='rotate(-90 16 "
       << (kT + kB) / 2 << ")'>" << ylabel << "</text>\n";
}

void open_svg(std::ofstream& os) {
    os << "<?xml version='1.0' encoding='UTF-8'?>\n";
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
       << "' viewBox='0 0 " << kW << " " << kH << "'>\n";
    os << "<rect width='" << kW << "' height='" << kH << "' fill='white'/>\n";
}

}  // namespace

void write_convergence_svg(const std::vector<RunResult>& results, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("svg: cannot write " + path);

    std::vector<std::string> order;
    std::map<std::string, std::vector<const RunResult*>> by_tech;
    int max_round = 1;
    for (const auto& r : results) {
        const std::string name = technique_name(r.technique);
        if (!by_tech.count(name)) order.push_back(name);
        by_tech[name].push_back(&r);
        if (!r.rounds.empty()) max_round = std::max(max_round, r.rounds.back().round);
    }

    Scale s{0.0, static_cast<double>(max_round), 0.0, 1.0};
    open_svg(os);
    axes(os, s, "round", "test accuracy");

    int color = 0;
    for (const auto& name : order) {
        const auto& runs = by_tech[name];
        const std::size_t n_rounds = runs[0]->rounds.size();
        std::string line, upper, lower;
        for (std::size_t i = 0; i < n_rounds; ++i) {
            double mean = 0.0;
            int n = 0;
            for (const auto* r : runs)
                if (i < r->rounds.size()) {
                    mean += r->rounds[i].accuracy;
                    ++n;
                }
            mean /= n;
            double var = 0.0;
            for (const auto* r : runs)
                if (i < r->rounds.size())
                    var += (r->rounds[i].accuracy - mean) * (r->rounds[i].accuracy - mean);
            const double sd = std::sqrt(var / n);
            const double x = s.px(runs[0]->rounds[i].round);
            line += fmt(x) + "," + fmt(s.py(mean)) + " ";
            upper += fmt(x) + "," + fmt(s.py(std::min(1.0, mean + sd))) + " ";
            lower = fmt(x) + "," + fmt(s.py(std::max(0.0, mean - sd))) + " " + lower;
        }
        const char* c = kColors[color % 6];
        os << "<polygon points='" << upper << lower << "' fill='" << c
           << "' fill-opacity='0.15' stroke='none'/>\n";
        os << "<polyline points='" << line << "' fill='none' stroke='" << c
           << "' stroke-width='1.5'/>\n";
        os << "<text x='" << kR - 150 << "' y='" << kT + 16 + 16 * color
           << "' font-size='12' fill='" << c << "'>" << name << "</text>\n";
        ++color;
    }
    os << "</svg>\n";
}

void write_pareto_svg(const std::vector<Individual>& front,
                      const std::vector<Individual>& uniform_curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("svg: cannot write " + path);

    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    auto stretch = [&](const std::vector<Individual>& v) {
        for (const auto& i : v) {
            x0 = std::min(x0, i.macs);
            x1 = std::max(x1, i.macs);
            y0 = std::min(y0, i.delta_acc);
            y1 = std::max(y1, i.delta_acc);
        }
    };
    stretch(front);
    stretch(uniform_curve);
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    const double ypad = 0.05 * (y1 - y0);
    Scale s{x0, x1, y0 - ypad, y1 + ypad};

    open_svg(os);
    axes(os, s, "expected forward MACs", "delta accuracy (short training)");

    std::string curve;
    for (const auto& i : uniform_curve) curve += fmt(s.px(i.macs)) + "," + fmt(s.py(i.delta_acc)) + " ";
    os << "<polyline points='" << curve
       << "' fill='none' stroke='#777777' stroke-width='1.2' stroke-dasharray='5,3'/>\n";
    for (const auto& i : uniform_curve)
        os << "<circle cx='" << fmt(s.px(i.macs)) << "' cy='" << fmt(s.py(i.delta_acc))
           << "' r='3' fill='#777777'/>\n";
    for (const auto& i : front)
        os << "<circle cx='" << fmt(s.px(i.macs)) << "' cy='" << fmt(s.py(i.delta_acc))
           << "' r='3.5' fill='#d62728'/>\n";
    os << "<text x='" << kR - 220 << "' y='" << kT + 16
       << "' font-size='12' fill='#d62728'>Pareto front (per-layer rates)</text>\n";
    os << "<text x='" << kR - 220 << "' y='" << kT + 32
       << "' font-size='12' fill='#777777'>uniform rate reference</text>\n";
    os << "</svg>\n";
}

}  // namespace distreal
