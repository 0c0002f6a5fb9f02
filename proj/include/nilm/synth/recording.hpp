#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace nilm::synth {

// Synchronised bus measurements plus optional per-appliance ground truth.
struct RawRecording {
    double fs = 0.0;
    std::vector<double> current;  // amperes
    std::vector<double> voltage;  // volts
    std::vector<std::vector<std::uint8_t>> labels;   // [K][n], optional
    std::vector<std::vector<double>> appliance_power;  // [K][n] watts, optional

    std::size_t size() const { return current.size(); }
    std::size_t num_appliances() const { return labels.size(); }
    bool has_labels() const { return !labels.empty(); }
    bool has_power() const { return !appliance_power.empty(); }

    void validate() const;
};

// Samples [begin, end) of every series.
RawRecording crop(const RawRecording& rec, std::size_t begin, std::size_t end);

class ParseError : public std::runtime_error {
public:
    ParseError(const std::filesystem::path& path, std::size_t line, const std::string& what);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Header `t,current,voltage[,label_0..label_{K-1}]`, uniformly spaced rows.
// fs <= 0 infers the rate from the first interval.
RawRecording ingest_csv(const std::filesystem::path& path, double fs);
void write_csv(const RawRecording& rec, const std::filesystem::path& path);

// Companion ground-truth file: `t,power_0..power_{K-1}`.
void write_power_csv(const RawRecording& rec, const std::filesystem::path& path);
void read_power_csv(const std::filesystem::path& path, RawRecording& rec);

}  // namespace nilm::synth
