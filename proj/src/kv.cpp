#include "srcloc/kv.hpp"

#include <fstream>
#include <sstream>

#include "srcloc/dataset.hpp"
#include "srcloc/errors.hpp"

namespace srcloc::kv {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

Entries parse(const std::string& text, const std::string& origin) {
    Entries out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno), "expected 'key = value'");
        }
        std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno), "empty key");
        out.emplace_back(std::move(key), trim(t.substr(eq + 1)));
    }
    return out;
}

Entries read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path.string());
}

void write_file(const Entries& entries, const std::filesystem::path& path, const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    if (!comment.empty()) out << "# " << comment << '\n';
    for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::string format_points(const std::vector<Point>& points) {
    std::string s;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i) s += "; ";
        s += data::format_double(points[i].x) + " " + data::format_double(points[i].y);
    }
    return s;
}

std::vector<Point> parse_points(const std::string& text, const std::string& field) {
    std::vector<Point> out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        std::istringstream pin(item);
        std::string xs, ys, extra;
        if (!(pin >> xs >> ys) || (pin >> extra)) throw ConfigError(field, "expected 'x y' pairs, got '" + item + "'");
        out.push_back({data::parse_double(xs, field), data::parse_double(ys, field)});
    }
    return out;
}

} // namespace srcloc::kv
