#include "qostopics/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace qos {

namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 70, kRight = 200, kTop = 40, kBottom = 60;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v == 0.0 ? 0.0 : v);
    return buf;
}

std::string fmt(double v, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

struct Scale {
    double lo, hi, px_lo, px_hi;
    double operator()(double v) const { return hi == lo ? 0.5 * (px_lo + px_hi) : px_lo + (v - lo) / (hi - lo) * (px_hi - px_lo); }
};

void open_svg(std::ostringstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" viewBox=\"0 0 "
        << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        out << "<text class=\"title\" x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
            << xml_escape(title) << "</text>\n";
}

void legend(std::ostringstream& out, const std::vector<std::string>& labels) {
    out << "<g class=\"legend\">\n";
    for (std::size_t t = 0; t < labels.size(); ++t) {
        const double y = kTop + 18.0 * static_cast<double>(t);
        out << "<rect x=\"" << num(kWidth - kRight + 15) << "\" y=\"" << num(y) << "\" width=\"12\" height=\"12\" fill=\""
            << topic_color(static_cast<int>(t)) << "\"/>";
        out << "<text x=\"" << num(kWidth - kRight + 32) << "\" y=\"" << num(y + 10) << "\">" << xml_escape(labels[t])
            << "</text>\n";
    }
    out << "</g>\n";
}

void frame(std::ostringstream& out) {
    out << "<rect class=\"frame\" x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(kWidth - kLeft - kRight)
        << "\" height=\"" << num(kHeight - kTop - kBottom) << "\" fill=\"none\" stroke=\"#333\"/>\n";
}

void y_tick(std::ostringstream& out, double y, const std::string& label) {
    out << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(y) << "\" x2=\"" << num(kLeft) << "\" y2=\"" << num(y)
        << "\" stroke=\"#333\"/><text class=\"ytick\" x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\">" << label << "</text>\n";
}

void x_tick(std::ostringstream& out, double x, const std::string& label) {
    const double base = kHeight - kBottom;
    out << "<line x1=\"" << num(x) << "\" y1=\"" << num(base) << "\" x2=\"" << num(x) << "\" y2=\"" << num(base + 5)
        << "\" stroke=\"#333\"/><text class=\"xtick\" x=\"" << num(x) << "\" y=\"" << num(base + 18)
        << "\" text-anchor=\"middle\">" << xml_escape(label) << "</text>\n";
}

void axis_labels(std::ostringstream& out, const std::string& x, const std::string& y) {
    const double mid_x = 0.5 * (kLeft + kWidth - kRight), mid_y = 0.5 * (kTop + kHeight - kBottom);
    out << "<text class=\"xlabel\" x=\"" << num(mid_x) << "\" y=\"" << num(kHeight - 15) << "\" text-anchor=\"middle\">"
        << xml_escape(x) << "</text>\n";
    out << "<text class=\"ylabel\" x=\"18\" y=\"" << num(mid_y) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << num(mid_y) << ")\">" << xml_escape(y) << "</text>\n";
}

}  // namespace

std::string topic_color(int topic) {
    const int n = static_cast<int>(std::size(kPalette));
    return kPalette[((topic % n) + n) % n];
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string render_scatter(const std::vector<ScatterPoint>& points, const std::vector<std::string>& topic_labels,
                           const std::string& title) {
    std::ostringstream out;
    open_svg(out, title);
    frame(out);
    if (!points.empty()) {
        double x_lo = points[0].x, x_hi = x_lo, y_lo = points[0].y, y_hi = y_lo;
        for (const auto& p : points) {
            if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw Error("scatter coordinates must be finite");
            x_lo = std::min(x_lo, p.x);
            x_hi = std::max(x_hi, p.x);
            y_lo = std::min(y_lo, p.y);
            y_hi = std::max(y_hi, p.y);
        }
        const Scale sx{x_lo, x_hi, kLeft + 10, kWidth - kRight - 10};
        const Scale sy{y_lo, y_hi, kHeight - kBottom - 10, kTop + 10};
        out << "<g class=\"points\">\n";
        for (const auto& p : points) {
            const std::string label = p.topic >= 0 && static_cast<std::size_t>(p.topic) < topic_labels.size()
                                          ? topic_labels[static_cast<std::size_t>(p.topic)]
                                          : "topic " + std::to_string(p.topic);
            out << "<circle cx=\"" << num(sx(p.x)) << "\" cy=\"" << num(sy(p.y)) << "\" r=\"3\" fill=\"" << topic_color(p.topic)
                << "\" fill-opacity=\"0.8\"><title>" << xml_escape(p.review_id) << " | topic " << p.topic << ": "
                << xml_escape(label) << " | p=" << fmt(p.prob, 3) << "</title></circle>\n";
        }
        out << "</g>\n";
    }
    legend(out, topic_labels);
    out << "</svg>\n";
    return out.str();
}

std::string render_boxplots(const std::vector<ScoreBox>& boxes, const std::vector<std::string>& topic_labels,
                            const std::string& title) {
    if (boxes.empty()) throw Error("box plot needs at least one box");
    std::vector<const ScoreBox*> order;
    for (const auto& b : boxes) order.push_back(&b);
    std::stable_sort(order.begin(), order.end(), [](const ScoreBox* a, const ScoreBox* b) {
        return a->median != b->median ? a->median > b->median : a->topic < b->topic;
    });

    std::ostringstream out;
    open_svg(out, title);
    frame(out);
    const Scale sy{1.0, 10.0, kHeight - kBottom, kTop};
    for (int s = 1; s <= 10; ++s) y_tick(out, sy(s), std::to_string(s));
    const double slot = (kWidth - kLeft - kRight) / static_cast<double>(order.size());
    const double half = std::min(30.0, slot * 0.3);
    for (std::size_t i = 0; i < order.size(); ++i) {
        const ScoreBox& b = *order[i];
        const double cx = kLeft + slot * (static_cast<double>(i) + 0.5);
        const std::string color = topic_color(b.topic);
        out << "<g class=\"box\" data-topic=\"" << b.topic << "\"><title>topic " << b.topic << " n=" << b.n << " min="
            << fmt(b.min, 2) << " q1=" << fmt(b.q1, 2) << " median=" << fmt(b.median, 2) << " q3=" << fmt(b.q3, 2)
            << " max=" << fmt(b.max, 2) << "</title>\n";
        out << "<line class=\"whisker\" x1=\"" << num(cx) << "\" y1=\"" << num(sy(b.min)) << "\" x2=\"" << num(cx) << "\" y2=\""
            << num(sy(b.max)) << "\" stroke=\"#333\"/>\n";
        for (double end : {b.min, b.max})
            out << "<line x1=\"" << num(cx - half / 2) << "\" y1=\"" << num(sy(end)) << "\" x2=\"" << num(cx + half / 2)
                << "\" y2=\"" << num(sy(end)) << "\" stroke=\"#333\"/>\n";
        out << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(sy(b.q3)) << "\" width=\"" << num(2 * half) << "\" height=\""
            << num(sy(b.q1) - sy(b.q3)) << "\" fill=\"" << color << "\" fill-opacity=\"0.6\" stroke=\"#333\"/>\n";
        out << "<line class=\"median\" x1=\"" << num(cx - half) << "\" y1=\"" << num(sy(b.median)) << "\" x2=\"" << num(cx + half)
            << "\" y2=\"" << num(sy(b.median)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        for (double o : b.outliers)
            out << "<circle class=\"outlier\" cx=\"" << num(cx) << "\" cy=\"" << num(sy(std::clamp(o, 1.0, 10.0)))
                << "\" r=\"2.5\" fill=\"none\" stroke=\"#333\"/>\n";
        out << "</g>\n";
        x_tick(out, cx, "T" + std::to_string(b.topic));
    }
    legend(out, topic_labels);
    axis_labels(out, "topic", "score");
    out << "</svg>\n";
    return out.str();
}

std::string render_coherence_curve(const SweepResult& sweep, const std::string& title) {
    if (sweep.k_values.empty()) throw Error("coherence curve needs a non-empty sweep");
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 0; i < sweep.k_values.size(); ++i) {
        const double m = sweep.mean_coherence[i], s = std::isfinite(sweep.std_coherence[i]) ? sweep.std_coherence[i] : 0.0;
        if (!std::isfinite(m)) continue;
        lo = std::min(lo, m - s);
        hi = std::max(hi, m + s);
    }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    const double pad = hi > lo ? 0.08 * (hi - lo) : 0.05;
    lo -= pad;
    hi += pad;
    const auto [k_lo, k_hi] = std::minmax_element(sweep.k_values.begin(), sweep.k_values.end());
    const Scale sx{static_cast<double>(*k_lo) - 0.5, static_cast<double>(*k_hi) + 0.5, kLeft, kWidth - kRight};
    const Scale sy{lo, hi, kHeight - kBottom, kTop};

    std::ostringstream out;
    open_svg(out, title);
    frame(out);
    for (int t = 0; t <= 4; ++t) {
        const double v = lo + (hi - lo) * t / 4.0;
        y_tick(out, sy(v), fmt(v, 3));
    }
    for (int k : sweep.k_values) x_tick(out, sx(k), std::to_string(k));
    std::string path;
    for (std::size_t i = 0; i < sweep.k_values.size(); ++i) {
        const double m = sweep.mean_coherence[i];
        if (!std::isfinite(m)) continue;
        path += (path.empty() ? "M" : " L") + num(sx(sweep.k_values[i])) + " " + num(sy(m));
    }
    if (!path.empty()) out << "<path class=\"curve\" d=\"" << path << "\" fill=\"none\" stroke=\"#1f77b4\"/>\n";
    for (std::size_t i = 0; i < sweep.k_values.size(); ++i) {
        const double m = sweep.mean_coherence[i];
        if (!std::isfinite(m)) continue;
        const double s = std::isfinite(sweep.std_coherence[i]) ? sweep.std_coherence[i] : 0.0;
        const double x = sx(sweep.k_values[i]);
        out << "<line class=\"errorbar\" x1=\"" << num(x) << "\" y1=\"" << num(sy(m - s)) << "\" x2=\"" << num(x) << "\" y2=\""
            << num(sy(m + s)) << "\" stroke=\"#1f77b4\"/>\n";
        out << "<circle class=\"mean\" cx=\"" << num(x) << "\" cy=\"" << num(sy(m)) << "\" r=\"3.5\" fill=\"#1f77b4\"><title>K="
            << sweep.k_values[i] << " mean=" << fmt(m, 4) << " std=" << fmt(s, 4) << "</title></circle>\n";
        if (sweep.k_values[i] == sweep.best_k)
            out << "<circle class=\"best\" cx=\"" << num(x) << "\" cy=\"" << num(sy(m)) << "\" r=\"9\" fill=\"none\" stroke=\"black\" "
                   "stroke-width=\"2\"/>\n";
    }
    axis_labels(out, "number of topics", "coherence (C_V)");
    out << "</svg>\n";
    return out.str();
}

}  // namespace qos
