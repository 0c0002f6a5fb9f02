#include "nilm/synth/recording.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string_view>

namespace nilm::synth {

void RawRecording::validate() const {
    if (!(fs > 0.0)) throw std::invalid_argument("recording: sampling rate must be positive");
    if (current.size() != voltage.size()) throw std::invalid_argument("recording: current and voltage lengths differ");
    for (const auto& l : labels)
        if (l.size() != current.size()) throw std::invalid_argument("recording: label series length differs from sample count");
    for (const auto& p : appliance_power)
        if (p.size() != current.size()) throw std::invalid_argument("recording: power series length differs from sample count");
    if (has_power() && has_labels() && appliance_power.size() != labels.size())
        throw std::invalid_argument("recording: label and power appliance counts differ");
}

RawRecording crop(const RawRecording& rec, std::size_t begin, std::size_t end) {
    if (begin >= end || end > rec.size()) throw std::out_of_range("crop: range outside recording");
    auto cut = [&](const auto& v) { return std::decay_t<decltype(v)>(v.begin() + static_cast<long>(begin), v.begin() + static_cast<long>(end)); };
    RawRecording out;
    out.fs = rec.fs;
    out.current = cut(rec.current);
    out.voltage = cut(rec.voltage);
    for (const auto& l : rec.labels) out.labels.push_back(cut(l));
    for (const auto& p : rec.appliance_power) out.appliance_power.push_back(cut(p));
    return out;
}

ParseError::ParseError(const std::filesystem::path& path, std::size_t line, const std::string& what)
    : std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what), line_(line) {}

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (s.empty()) return false;
    if (s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

void write_double(std::FILE* f, double v) { std::fprintf(f, "%.17g", v); }

struct File {
    std::FILE* f;
    explicit File(const std::filesystem::path& p) : f(std::fopen(p.c_str(), "w")) {
        if (!f) throw std::runtime_error("cannot open for writing: " + p.string());
    }
    ~File() { std::fclose(f); }
    File(const File&) = delete;
    File& operator=(const File&) = delete;
};

}  // namespace

RawRecording ingest_csv(const std::filesystem::path& path, double fs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open recording: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
    const auto header = split(trim(line));
    if (header.size() < 3 || trim(header[0]) != "t" || trim(header[1]) != "current" || trim(header[2]) != "voltage")
        throw ParseError(path, 1, "header must start with t,current,voltage");
    const std::size_t k = header.size() - 3;
    for (std::size_t i = 0; i < k; ++i)
        if (trim(header[3 + i]) != "label_" + std::to_string(i))
            throw ParseError(path, 1, "expected column label_" + std::to_string(i));

    RawRecording rec;
    rec.labels.resize(k);
    std::vector<double> times;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw ParseError(path, lineno, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(cells.size()));
        double vals[3];
        static constexpr const char* kNames[3] = {"t", "current", "voltage"};
        for (int c = 0; c < 3; ++c)
            if (!parse_double(cells[c], vals[c]))
                throw ParseError(path, lineno, std::string("non-numeric ") + kNames[c] + " value '" + std::string(trim(cells[c])) + "'");
        times.push_back(vals[0]);
        rec.current.push_back(vals[1]);
        rec.voltage.push_back(vals[2]);
        for (std::size_t i = 0; i < k; ++i) {
            double v;
            if (!parse_double(cells[3 + i], v)) throw ParseError(path, lineno, "non-numeric label_" + std::to_string(i));
            rec.labels[i].push_back(v > 0.5 ? 1 : 0);
        }
    }
    if (times.empty()) throw ParseError(path, lineno, "no data rows");
    if (!(fs > 0.0)) {
        if (times.size() < 2 || !(times[1] > times[0])) throw ParseError(path, 3, "cannot infer sampling rate");
        fs = 1.0 / (times[1] - times[0]);
    }
    const double dt = 1.0 / fs;
    for (std::size_t i = 1; i < times.size(); ++i)
        if (std::abs((times[i] - times[i - 1]) - dt) > 1e-6 * dt)
            throw ParseError(path, i + 2, "non-uniform timestamp spacing");
    rec.fs = fs;
    return rec;
}

void write_csv(const RawRecording& rec, const std::filesystem::path& path) {
    rec.validate();
    File file(path);
    std::fputs("t,current,voltage", file.f);
    for (std::size_t k = 0; k < rec.labels.size(); ++k) std::fprintf(file.f, ",label_%zu", k);
    std::fputc('\n', file.f);
    for (std::size_t i = 0; i < rec.size(); ++i) {
        write_double(file.f, static_cast<double>(i) / rec.fs);
        std::fputc(',', file.f);
        write_double(file.f, rec.current[i]);
        std::fputc(',', file.f);
        write_double(file.f, rec.voltage[i]);
        for (const auto& l : rec.labels) std::fprintf(file.f, ",%d", static_cast<int>(l[i]));
        std::fputc('\n', file.f);
    }
}

void write_power_csv(const RawRecording& rec, const std::filesystem::path& path) {
    rec.validate();
    File file(path);
    std::fputs("t", file.f);
    for (std::size_t k = 0; k < rec.appliance_power.size(); ++k) std::fprintf(file.f, ",power_%zu", k);
    std::fputc('\n', file.f);
    for (std::size_t i = 0; i < rec.size(); ++i) {
        write_double(file.f, static_cast<double>(i) / rec.fs);
        for (const auto& p : rec.appliance_power) {
            std::fputc(',', file.f);
            write_double(file.f, p[i]);
        }
        std::fputc('\n', file.f);
    }
}

void read_power_csv(const std::filesystem::path& path, RawRecording& rec) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open power file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path, 1, "empty file");
    const auto header = split(trim(line));
    if (header.empty() || trim(header[0]) != "t") throw ParseError(path, 1, "header must start with t");
    const std::size_t k = header.size() - 1;
    std::vector<std::vector<double>> power(k);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) throw ParseError(path, lineno, "ragged row");
        for (std::size_t i = 0; i < k; ++i) {
            double v;
            if (!parse_double(cells[1 + i], v)) throw ParseError(path, lineno, "non-numeric power value");
            power[i].push_back(v);
        }
    }
    for (const auto& p : power)
        if (p.size() != rec.size()) throw ParseError(path, lineno, "power file length differs from recording");
    rec.appliance_power = std::move(power);
}

}  // namespace nilm::synth
