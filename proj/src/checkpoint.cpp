#include "latref/checkpoint.hpp"

#include <fstream>

#include <json.hpp>

namespace latref {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kBackendTag = "mlp";

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows; ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols; ++c) row.push_back(m.at(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, int rows, int cols, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw CheckpointShapeError(std::string(name) + ": expected " + std::to_string(rows) + " rows");
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw CheckpointShapeError(std::string(name) + ": row " + std::to_string(r) + " expected " +
                                 std::to_string(cols) + " entries");
    for (int c = 0; c < cols; ++c) {
      const auto& v = row[static_cast<size_t>(c)];
      if (!v.is_number()) throw CheckpointShapeError(std::string(name) + ": non-numeric entry");
      m.at(r, c) = v.get<double>();
    }
  }
  return m;
}

std::vector<double> vector_from_json(const json& j, int n, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw CheckpointShapeError(std::string(name) + ": expected " + std::to_string(n) + " entries");
  std::vector<double> v(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& x = j[static_cast<size_t>(i)];
    if (!x.is_number()) throw CheckpointShapeError(std::string(name) + ": non-numeric entry");
    v[static_cast<size_t>(i)] = x.get<double>();
  }
  return v;
}

}  // namespace

void save_checkpoint(const MlpModel& model, const std::string& path) {
  const MlpParams& p = model.params();
  json j;
  j["format_version"] = kFormatVersion;
  j["backend_tag"] = kBackendTag;
  j["d"] = p.dim();
  j["H"] = p.hidden();
  j["n_choices"] = p.n_choices();
  j["labels"] = model.labels();
  json params;
  params["W1"] = matrix_to_json(p.W1);
  params["b1"] = p.b1;
  params["W2"] = matrix_to_json(p.W2);
  params["b2"] = p.b2;
  params["decode_W"] = matrix_to_json(p.decode_W);
  params["decode_b"] = p.decode_b;
  params["encoder_W"] = matrix_to_json(p.encoder_W);
  j["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
  if (!out) throw CheckpointError("write to '" + path + "' failed");
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointParseError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CheckpointParseError(path + ": " + e.what());
  }
  if (!j.is_object()) throw CheckpointParseError(path + ": not a JSON object");

  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    throw CheckpointParseError(path + ": missing format_version");
  const int version = j["format_version"].get<int>();
  if (version != kFormatVersion)
    throw CheckpointVersionError(path + ": format_version " + std::to_string(version) +
                                 " unsupported (expected " + std::to_string(kFormatVersion) + ")");
  if (!j.contains("backend_tag") || !j["backend_tag"].is_string())
    throw CheckpointParseError(path + ": missing backend_tag");
  if (j["backend_tag"].get<std::string>() != kBackendTag)
    throw CheckpointVersionError(path + ": unsupported backend_tag '" +
                                 j["backend_tag"].get<std::string>() + "'");

  for (const char* field : {"d", "H", "n_choices", "labels", "params"})
    if (!j.contains(field)) throw CheckpointParseError(path + ": missing field '" + field + "'");

  const int d = j["d"].get<int>();
  const int H = j["H"].get<int>();
  const int C = j["n_choices"].get<int>();
  if (d < 1 || H < 1 || C < 2) throw CheckpointShapeError(path + ": degenerate header shape");

  const auto& pj = j["params"];
  for (const char* field : {"W1", "b1", "W2", "b2", "decode_W", "decode_b", "encoder_W"})
    if (!pj.contains(field)) throw CheckpointParseError(path + ": missing parameter '" + field + "'");

  // Feature width is carried by encoder_W's row length.
  const auto& enc = pj["encoder_W"];
  if (!enc.is_array() || enc.empty() || !enc[0].is_array() || enc[0].empty())
    throw CheckpointShapeError(path + ": encoder_W must be a non-empty matrix");
  const int F = static_cast<int>(enc[0].size());

  MlpParams p;
  try {
    p.W1 = matrix_from_json(pj["W1"], H, d, "W1");
    p.b1 = vector_from_json(pj["b1"], H, "b1");
    p.W2 = matrix_from_json(pj["W2"], d, H, "W2");
    p.b2 = vector_from_json(pj["b2"], d, "b2");
    p.decode_W = matrix_from_json(pj["decode_W"], C, d, "decode_W");
    p.decode_b = vector_from_json(pj["decode_b"], C, "decode_b");
    p.encoder_W = matrix_from_json(pj["encoder_W"], d, F, "encoder_W");
  } catch (const CheckpointShapeError& e) {
    throw CheckpointShapeError(path + ": " + e.what());
  }

  auto labels = j["labels"].get<std::vector<std::string>>();
  if (static_cast<int>(labels.size()) != C)
    throw CheckpointShapeError(path + ": label count != n_choices");

  try {
    return MlpModel(std::move(p), std::move(labels));
  } catch (const ValidationError& e) {
    throw CheckpointShapeError(path + ": " + e.what());
  }
}

}  // namespace latref
