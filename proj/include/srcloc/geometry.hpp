#pragma once

#include <cmath>

namespace srcloc {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
};

inline double squared_distance(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

inline bool in_unit_square(const Point& p) {
    return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
}

inline Point mirror_x(const Point& p) { return {1.0 - p.x, p.y}; }
inline Point mirror_y(const Point& p) { return {p.x, 1.0 - p.y}; }

} // namespace srcloc
