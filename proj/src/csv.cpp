#include "crosscast/csv.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>

namespace crosscast::csv {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::vector<std::vector<std::string>> read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw SchemaError("cannot open " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        rows.push_back(split_line(line));
    }
    return rows;
}

std::string format_value(double v) {
    if (std::isnan(v))
        return {};
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_value(const std::string& field, const std::string& context) {
    if (field.empty())
        return kMissing;
    const char* begin = field.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + field.size())
        throw SchemaError("bad numeric field '" + field + "' in " + context);
    return v;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + tmp);
        out << content;
        if (!out)
            throw Error("short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace crosscast::csv
