#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sindyae/datagen.hpp"
#include "sindyae/training.hpp"

namespace sindyae {

/// Malformed or truncated input files. The message carries the file and the
/// offending line or byte offset.
class DataCorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string version_string();

// Dataset directories: manifest.json plus X.bin, dX.bin and optional ddX.bin
// holding little-endian float64 values, row-major, no header.
void write_matrix_bin(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_bin(const std::filesystem::path& path, Eigen::Index rows, Eigen::Index cols);

void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

/// FNV-1a over the binary payload files of a dataset directory, as hex.
std::string dataset_hash(const std::filesystem::path& dir);

nlohmann::json to_json(const LibrarySpec& spec);
LibrarySpec library_spec_from_json(const nlohmann::json& j, int default_state_dim);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig read_train_config(const std::filesystem::path& path);

/// Model file: layer widths, weights and biases as nested arrays, Xi and the
/// mask row-major, library spec, term names, config echo and version.
/// Networks are optional so pure SINDy models can share the format.
nlohmann::json model_to_json(const TrainedModel& model);
nlohmann::json sindy_model_to_json(const SindyModel& model);

struct LoadedModel {
  std::optional<NetworkParams> network;
  SindyModel sindy;
  std::optional<TrainConfig> config;
};
LoadedModel model_from_json(const nlohmann::json& j);
LoadedModel read_model(const std::filesystem::path& path);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

/// History CSV with header epoch,total,recon,sindy_x,sindy_z,reg,active_terms,val_fuv_x,val_fuv_dx.
/// Validation columns are empty on epochs without a validation pass.
void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);
TrainHistory read_history_csv(const std::filesystem::path& path);

/// Numeric CSV with a header row. Throws DataCorruptionError with the line
/// number on malformed rows.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;

  int column(const std::string& name) const;  // -1 when absent
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace sindyae
