#include "sindyae/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#ifndef SINDYAE_VERSION
#define SINDYAE_VERSION "unknown"
#endif

namespace sindyae {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_string() { return SINDYAE_VERSION; }

namespace {

double to_little_endian(double v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits = __builtin_bswap64(bits);
    std::memcpy(&v, &bits, sizeof bits);
    return v;
  }
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json row_to_json(const RowVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw DataCorruptionError(std::string(what) + ": expected nested array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw DataCorruptionError(std::string(what) + ": ragged row " + std::to_string(i));
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

RowVector row_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw DataCorruptionError(std::string(what) + ": expected array");
  RowVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json network_to_json(const Network& net) {
  json layers = json::array();
  for (const auto& layer : net.layers)
    layers.push_back({{"weights", matrix_to_json(layer.weights)}, {"bias", row_to_json(layer.bias)}});
  return layers;
}

Network network_from_json(const json& j, const char* what) {
  Network net;
  for (const auto& layer : j) {
    DenseLayer l{matrix_from_json(layer.at("weights"), what), row_from_json(layer.at("bias"), what)};
    if (l.bias.size() != l.weights.cols())
      throw DataCorruptionError(std::string(what) + ": bias length differs from layer width");
    if (!net.layers.empty() && net.layers.back().weights.cols() != l.weights.rows())
      throw DataCorruptionError(std::string(what) + ": consecutive layer widths disagree");
    net.layers.push_back(std::move(l));
  }
  return net;
}

}  // namespace

void write_matrix_bin(const fs::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::vector<double> buffer(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      buffer[static_cast<std::size_t>(j)] = to_little_endian(m(i, j));
    out.write(reinterpret_cast<const char*>(buffer.data()),
              static_cast<std::streamsize>(buffer.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Matrix read_matrix_bin(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataCorruptionError("missing data file " + path.string());
  const auto expected = static_cast<std::uintmax_t>(rows) * static_cast<std::uintmax_t>(cols) * sizeof(double);
  const auto actual = fs::file_size(path);
  if (actual != expected) {
    std::ostringstream msg;
    msg << path.string() << ": expected " << expected << " bytes (" << rows << " x " << cols
        << " float64), found " << actual << "; data ends at byte offset " << actual;
    throw DataCorruptionError(msg.str());
  }
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(expected));
  if (!in) throw DataCorruptionError(path.string() + ": short read");
  if constexpr (std::endian::native != std::endian::little)
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = to_little_endian(m.data()[i]);
  return m;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataCorruptionError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    std::ostringstream msg;
    msg << path.string() << ": JSON parse error at byte offset " << e.byte << ": " << e.what();
    throw DataCorruptionError(msg.str());
  }
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  data.validate();
  fs::create_directories(dir);
  write_matrix_bin(dir / "X.bin", data.x);
  write_matrix_bin(dir / "dX.bin", data.dx);
  if (data.ddx) write_matrix_bin(dir / "ddX.bin", *data.ddx);
  json traj = json::array();
  for (const auto& t : data.trajectories) traj.push_back({t.start, t.length});
  json manifest = data.metadata;
  manifest["format"] = "sindyae-dataset";
  manifest["rows"] = data.samples();
  manifest["cols"] = data.dim();
  manifest["dt"] = data.dt;
  manifest["dtype"] = "float64";
  manifest["byte_order"] = "little";
  manifest["layout"] = "row-major";
  manifest["has_ddx"] = data.ddx.has_value();
  manifest["files"] = data.ddx ? json{{"X", "X.bin"}, {"dX", "dX.bin"}, {"ddX", "ddX.bin"}}
                               : json{{"X", "X.bin"}, {"dX", "dX.bin"}};
  manifest["trajectories"] = traj;
  write_json(dir / "manifest.json", manifest);
}

Dataset read_dataset(const fs::path& dir) {
  const json manifest = read_json(dir / "manifest.json");
  Dataset data;
  try {
    if (manifest.value("byte_order", "little") != "little")
      throw DataCorruptionError("unsupported byte order in " + (dir / "manifest.json").string());
    const auto rows = manifest.at("rows").get<Eigen::Index>();
    const auto cols = manifest.at("cols").get<Eigen::Index>();
    data.dt = manifest.at("dt").get<double>();
    data.x = read_matrix_bin(dir / "X.bin", rows, cols);
    data.dx = read_matrix_bin(dir / "dX.bin", rows, cols);
    if (manifest.value("has_ddx", false)) data.ddx = read_matrix_bin(dir / "ddX.bin", rows, cols);
    for (const auto& t : manifest.value("trajectories", json::array()))
      data.trajectories.push_back({t.at(0).get<std::size_t>(), t.at(1).get<std::size_t>()});
  } catch (const json::exception& e) {
    throw DataCorruptionError((dir / "manifest.json").string() + ": " + e.what());
  }
  data.metadata = manifest;
  for (const char* key : {"format", "rows", "cols", "dt", "dtype", "byte_order", "layout",
                          "has_ddx", "files", "trajectories"})
    data.metadata.erase(key);
  try {
    data.validate();
  } catch (const std::exception& e) {
    throw DataCorruptionError((dir / "manifest.json").string() + ": " + e.what());
  }
  return data;
}

std::string dataset_hash(const fs::path& dir) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char* name : {"X.bin", "dX.bin", "ddX.bin"}) {
    const auto path = dir / name;
    if (!fs::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    std::vector<char> buf(1 << 16);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      for (std::streamsize i = 0; i < in.gcount(); ++i) {
        h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
        h *= 0x100000001b3ULL;
      }
    }
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

json to_json(const LibrarySpec& spec) {
  return {{"state_dim", spec.state_dim},
          {"poly_order", spec.poly_order},
          {"include_sine", spec.include_sine},
          {"model_order", spec.model_order}};
}

LibrarySpec library_spec_from_json(const json& j, int default_state_dim) {
  LibrarySpec s;
  s.state_dim = j.value("state_dim", default_state_dim);
  s.poly_order = j.at("poly_order").get<int>();
  s.include_sine = j.value("include_sine", false);
  s.model_order = j.value("model_order", 1);
  s.validate();
  return s;
}

json to_json(const TrainConfig& c) {
  return {{"input_dim", c.input_dim},
          {"latent_dim", c.latent_dim},
          {"encoder_widths", c.encoder_widths},
          {"decoder_widths", c.decoder_widths},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs_main", c.epochs_main},
          {"epochs_refine", c.epochs_refine},
          {"threshold", c.threshold},
          {"threshold_interval", c.threshold_interval},
          {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"lambda3", c.lambda3},
          {"library", to_json(c.library)},
          {"seed", c.seed},
          {"validation_interval", c.validation_interval}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  try {
    c.input_dim = j.at("input_dim").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.encoder_widths = j.at("encoder_widths").get<std::vector<int>>();
    c.decoder_widths = j.at("decoder_widths").get<std::vector<int>>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<int>();
    c.epochs_main = j.at("epochs_main").get<int>();
    c.epochs_refine = j.at("epochs_refine").get<int>();
    c.threshold = j.value("threshold", 0.1);
    c.threshold_interval = j.value("threshold_interval", 500);
    c.lambda1 = j.at("lambda1").get<double>();
    c.lambda2 = j.at("lambda2").get<double>();
    c.lambda3 = j.at("lambda3").get<double>();
    c.library = library_spec_from_json(j.at("library"), c.latent_dim);
    c.seed = j.value("seed", std::uint64_t{0});
    c.validation_interval = j.value("validation_interval", 100);
  } catch (const json::exception& e) {
    throw DataCorruptionError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainConfig read_train_config(const fs::path& path) {
  const json j = read_json(path);
  try {
    return train_config_from_json(j);
  } catch (const DataCorruptionError& e) {
    throw DataCorruptionError(path.string() + ": " + e.what());
  }
}

json sindy_model_to_json(const SindyModel& model) {
  model.validate();
  return {{"format", "sindyae-model"},
          {"version", version_string()},
          {"library", to_json(model.spec)},
          {"terms", Library(model.spec).names()},
          {"xi", matrix_to_json(model.xi)},
          {"mask", matrix_to_json(model.mask)},
          {"active_terms", model.active_terms()}};
}

json model_to_json(const TrainedModel& model) {
  json j = sindy_model_to_json(model.sindy);
  j["layer_widths"] = {{"encoder", model.network.encoder.widths()},
                       {"decoder", model.network.decoder.widths()}};
  j["encoder"] = network_to_json(model.network.encoder);
  j["decoder"] = network_to_json(model.network.decoder);
  j["config"] = to_json(model.config);
  j["seed"] = model.config.seed;
  j["metrics"] = {{"val_fuv_x", model.metrics.val_fuv_x},
                  {"val_fuv_dx", model.metrics.val_fuv_dx},
                  {"val_fuv_dz", model.metrics.val_fuv_dz},
                  {"active_terms", model.metrics.active_terms}};
  return j;
}

LoadedModel model_from_json(const json& j) {
  LoadedModel out;
  try {
    out.sindy.spec = library_spec_from_json(j.at("library"), 1);
    out.sindy.xi = matrix_from_json(j.at("xi"), "xi");
    out.sindy.mask = j.contains("mask") ? matrix_from_json(j.at("mask"), "mask")
                                        : Matrix::Ones(out.sindy.xi.rows(), out.sindy.xi.cols());
    if (j.contains("encoder") && j.contains("decoder")) {
      NetworkParams p{network_from_json(j.at("encoder"), "encoder"),
                      network_from_json(j.at("decoder"), "decoder")};
      if (p.encoder.output_width() != out.sindy.spec.state_dim ||
          p.decoder.input_width() != out.sindy.spec.state_dim ||
          p.decoder.output_width() != p.encoder.input_width())
        throw DataCorruptionError("model: network widths inconsistent with the library");
      if (j.contains("layer_widths") &&
          (j["layer_widths"].at("encoder").get<std::vector<int>>() != p.encoder.widths() ||
           j["layer_widths"].at("decoder").get<std::vector<int>>() != p.decoder.widths()))
        throw DataCorruptionError("model: layer_widths disagree with the stored weights");
      out.network = std::move(p);
    }
    if (j.contains("config")) out.config = train_config_from_json(j.at("config"));
  } catch (const json::exception& e) {
    throw DataCorruptionError(std::string("model: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataCorruptionError(std::string("model: ") + e.what());
  }
  try {
    out.sindy.validate();
  } catch (const std::exception& e) {
    throw DataCorruptionError(std::string("model: ") + e.what());
  }
  return out;
}

LoadedModel read_model(const fs::path& path) {
  const json j = read_json(path);
  try {
    return model_from_json(j);
  } catch (const DataCorruptionError& e) {
    throw DataCorruptionError(path.string() + ": " + e.what());
  }
}

namespace {

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

void write_history_csv(const fs::path& path, const TrainHistory& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "epoch,total,recon,sindy_x,sindy_z,reg,active_terms,val_fuv_x,val_fuv_dx\n";
  for (const auto& r : history.records) {
    out << r.epoch << ',' << format_double(r.loss.total) << ',' << format_double(r.loss.recon) << ','
        << format_double(r.loss.sindy_x) << ',' << format_double(r.loss.sindy_z) << ','
        << format_double(r.loss.reg) << ',' << r.active_terms << ','
        << (r.val_fuv_x ? format_double(*r.val_fuv_x) : "") << ','
        << (r.val_fuv_dx ? format_double(*r.val_fuv_dx) : "") << '\n';
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const fs::path& path, std::size_t line, std::size_t col) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  bool ok = !t.empty();
  if (ok) {
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      ok = false;
    }
  }
  if (!ok || used != t.size()) {
    std::ostringstream msg;
    msg << path.string() << ":" << line << ": column " << col << ": not a number: '" << t << "'";
    throw DataCorruptionError(msg.str());
  }
  return v;
}

}  // namespace

TrainHistory read_history_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataCorruptionError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  TrainHistory h;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split_line(trim(line));
    if (f.size() != 9) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": expected 9 fields, found " << f.size();
      throw DataCorruptionError(msg.str());
    }
    EpochRecord r;
    r.epoch = static_cast<int>(parse_number(f[0], path, line_no, 1));
    r.loss.total = parse_number(f[1], path, line_no, 2);
    r.loss.recon = parse_number(f[2], path, line_no, 3);
    r.loss.sindy_x = parse_number(f[3], path, line_no, 4);
    r.loss.sindy_z = parse_number(f[4], path, line_no, 5);
    r.loss.reg = parse_number(f[5], path, line_no, 6);
    r.active_terms = static_cast<int>(parse_number(f[6], path, line_no, 7));
    if (!trim(f[7]).empty()) r.val_fuv_x = parse_number(f[7], path, line_no, 8);
    if (!trim(f[8]).empty()) r.val_fuv_dx = parse_number(f[8], path, line_no, 9);
    h.records.push_back(r);
  }
  return h;
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataCorruptionError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataCorruptionError(path.string() + ":1: missing header");
  for (auto& h : split_line(trim(line))) table.header.push_back(trim(h));
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_line(trim(line));
    if (fields.size() != table.header.size()) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": expected " << table.header.size()
          << " fields, found " << fields.size();
      throw DataCorruptionError(msg.str());
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < fields.size(); ++c) row.push_back(parse_number(fields[c], path, line_no, c + 1));
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  return table;
}

}  // namespace sindyae
