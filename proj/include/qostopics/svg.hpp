#ifndef QOSTOPICS_SVG_HPP
#define QOSTOPICS_SVG_HPP

#include <string>
#include <vector>

#include "qostopics/coherence.hpp"
#include "qostopics/stats.hpp"

namespace qos {

struct ScatterPoint {
    std::string review_id;
    double x = 0.0;
    double y = 0.0;
    int topic = 0;
    double prob = 0.0;
};

/// Fill colour of a topic; the palette cycles after ten topics.
std::string topic_color(int topic);

std::string xml_escape(const std::string& s);

/// One circle per point with a <title> tooltip, plus a legend entry per label.
std::string render_scatter(const std::vector<ScatterPoint>& points, const std::vector<std::string>& topic_labels,
                           const std::string& title = {});

/// Box-and-whisker glyphs on a fixed [1, 10] score axis, ordered by
/// descending median (ties by topic index).
std::string render_boxplots(const std::vector<ScoreBox>& boxes, const std::vector<std::string>& topic_labels,
                            const std::string& title = {});

/// Mean coherence per K with +-1 std error bars; best K circled.
std::string render_coherence_curve(const SweepResult& sweep, const std::string& title = {});

}  // namespace qos

#endif  // QOSTOPICS_SVG_HPP
