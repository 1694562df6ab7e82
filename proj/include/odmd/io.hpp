#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "odmd/benchmark.hpp"
#include "odmd/generator.hpp"
#include "odmd/trainer.hpp"

namespace odmd {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

// One dataset line:
//   {"schema_version":1,"n":N,"intrinsics":{fx,fy,cx,cy,width,height},
//    "observations":[{"x","y","w","h","CX","CY","CZ"},...],"label_Z":Z,
//    "meta":{"W","H","X1","Y1","Z1","seed","index","reversed"}}
// Reals are written with 17 significant digits and always carry a decimal
// point or exponent, so every double (including -0) reads back exactly.
std::string encode_example_json(const DepthExample& example);
// line is used for error messages only. Unknown or missing fields raise
// ParseError; another schema_version raises VersionError.
DepthExample decode_example_json(const std::string& text, std::size_t line = 0);

// Binary dataset:
//   char[8] "ODMDDATA", u32 version (1), u64 record count, then per record
//   u32 byte length followed by
//     u32 n, f64 fx fy cx cy width height, f64 label_Z,
//     n x f64 (x, y, w, h, CX, CY, CZ),
//     f64 W H X1 Y1 Z1, u64 seed, u64 index, u8 reversed
// All values little-endian.
std::vector<std::uint8_t> encode_dataset_binary(std::span<const DepthExample> examples);
std::vector<DepthExample> decode_dataset_binary(std::span<const std::uint8_t> bytes);

// Picks the format by extension: ".odmd.bin" is binary, anything else is
// line-delimited JSON.
void save_dataset(const std::string& path, std::span<const DepthExample> examples);
std::vector<DepthExample> load_dataset(const std::string& path);

std::string generation_config_to_json(const GenerationConfig& cfg);
GenerationConfig generation_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);
// Reads a TrainConfig file. Fields left out keep the defaults of the
// "base" preset named inside the file, or of TrainConfig{} without one.
TrainConfig load_train_config(const std::string& path);

std::string report_to_json(const EvalReport& report);
// Columns: label_Z, prediction, abs_error, pct_error; one row per example,
// sets in report order. Failed examples have empty prediction and error
// cells.
std::string report_to_csv(const EvalReport& report);

std::string train_log_line(const TrainLogRecord& record);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace odmd
