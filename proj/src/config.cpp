#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wirepinn/error.hpp"
#include "wirepinn/mesh.hpp"

namespace wirepinn {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view s, std::size_t line, std::string_view key) {
    s = trim(s);
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw ConfigError("line " + std::to_string(line) + ": bad value for '" + std::string(key) +
                          "': '" + std::string(s) + "'");
    return v;
}

}  // namespace

DeviceConfig parse_device_config(std::string_view text) {
    DeviceConfig c;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto val = trim(line.substr(eq + 1));

        auto num = [&](auto& field) {
            field = parse_number<std::remove_reference_t<decltype(field)>>(val, line_no, key);
        };
        if (key == "radius_nm") num(c.radius_nm);
        else if (key == "tox_nm") num(c.tox_nm);
        else if (key == "length_nm") num(c.length_nm);
        else if (key == "nd_cm3") num(c.nd_cm3);
        else if (key == "na_cm3") num(c.na_cm3);
        else if (key == "nx") num(c.nx);
        else if (key == "ny") num(c.ny);
        else if (key == "ny_oxide") num(c.ny_oxide);
        else if (key == "eps_si") num(c.eps_si);
        else if (key == "eps_ox") num(c.eps_ox);
        else if (key == "gate_span_nm") {
            std::string spaced(val);
            for (char& ch : spaced)
                if (ch == ',') ch = ' ';
            std::istringstream fields(spaced);
            std::string begin, end, extra;
            if (!(fields >> begin >> end) || (fields >> extra))
                throw ConfigError("line " + std::to_string(line_no) +
                                  ": gate_span_nm needs two values 'begin, end'");
            c.gate_begin_nm = parse_number<double>(begin, line_no, key);
            c.gate_end_nm = parse_number<double>(end, line_no, key);
        } else {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
    }
    return c;
}

DeviceConfig load_device_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open device config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_device_config(ss.str());
}

}  // namespace wirepinn
