#ifndef LSE_MANIFEST_HPP
#define LSE_MANIFEST_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lse/types.hpp"

namespace lse {

/// Dataset manifest: a JSON document naming the matrix files, the label file,
/// the class split and the prototype files. Relative paths resolve against
/// the manifest's directory.
///
/// A semantic modality may omit its instance-level matrix path; assembly then
/// synthesizes the matrix by repeating each instance's class prototype.
struct DatasetManifest {
  struct Modality {
    std::string name;
    std::string path;  // empty => expand from prototypes (semantic only)
    ModalityKind kind = ModalityKind::kVisual;
  };
  struct Prototypes {
    std::string modality_name;
    std::string path;
    std::vector<int> class_ids;
  };

  std::vector<Modality> modalities;
  std::string labels_path;
  ClassSplit split;
  std::vector<Prototypes> prototypes;
  std::map<int, std::string> class_names;
};

/// Newline-separated integers, one per instance.
inline LabelVector read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open label file: " + path.string());
  LabelVector labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = io::detail::trim(line);
    if (sv.empty()) continue;
    int v = 0;
    auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
    if (ec != std::errc{} || ptr != sv.data() + sv.size())
      throw ValidationError("malformed label '" + std::string(sv) + "' at " +
                            path.string() + ":" + std::to_string(lineno));
    labels.push_back(v);
  }
  return labels;
}

inline void write_labels(const LabelVector& labels, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  for (int v : labels) out << v << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

namespace detail {

inline nlohmann::json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

inline void dump_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  nlohmann::json j = detail::load_json(path);
  DatasetManifest m;
  try {
    for (const auto& jm : j.at("modalities")) {
      DatasetManifest::Modality mod;
      mod.name = jm.at("name").get<std::string>();
      mod.path = jm.value("path", std::string{});
      mod.kind = modality_kind_from_string(jm.at("kind").get<std::string>());
      m.modalities.push_back(std::move(mod));
    }
    m.labels_path = j.at("labels").get<std::string>();
    m.split.seen = j.at("split").at("seen").get<std::vector<int>>();
    m.split.unseen = j.at("split").at("unseen").get<std::vector<int>>();
    for (const auto& jp : j.value("prototypes", nlohmann::json::array())) {
      DatasetManifest::Prototypes p;
      p.modality_name = jp.at("modality_name").get<std::string>();
      p.path = jp.at("path").get<std::string>();
      p.class_ids = jp.at("class_ids").get<std::vector<int>>();
      m.prototypes.push_back(std::move(p));
    }
    if (j.contains("class_names"))
      for (const auto& [key, val] : j.at("class_names").items())
        m.class_names[std::stoi(key)] = val.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid manifest " + path.string() + ": " + e.what());
  }
  return m;
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  nlohmann::json j;
  j["modalities"] = nlohmann::json::array();
  for (const auto& mod : m.modalities) {
    nlohmann::json jm{{"name", mod.name}, {"kind", to_string(mod.kind)}};
    if (!mod.path.empty()) jm["path"] = mod.path;
    j["modalities"].push_back(std::move(jm));
  }
  j["labels"] = m.labels_path;
  j["split"] = {{"seen", m.split.seen}, {"unseen", m.split.unseen}};
  j["prototypes"] = nlohmann::json::array();
  for (const auto& p : m.prototypes)
    j["prototypes"].push_back({{"modality_name", p.modality_name},
                               {"path", p.path},
                               {"class_ids", p.class_ids}});
  if (!m.class_names.empty()) {
    nlohmann::json names;
    for (const auto& [id, name] : m.class_names) names[std::to_string(id)] = name;
    j["class_names"] = std::move(names);
  }
  detail::dump_json(j, path);
}

/// Loads every file the manifest references and assembles a validated
/// Dataset. Instance order is the declared file order; modality and
/// prototype order follow the manifest.
inline Dataset assemble_dataset(const std::filesystem::path& manifest_path) {
  const DatasetManifest m = read_manifest(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) { return base / p; };

  Dataset ds;
  ds.split = m.split;
  ds.class_names = m.class_names;
  ds.labels = read_labels(resolve(m.labels_path));

  for (const auto& jp : m.prototypes) {
    PrototypeMatrix p;
    p.modality_name = jp.modality_name;
    p.class_ids = jp.class_ids;
    p.vectors = io::read_matrix(resolve(jp.path));
    ds.prototypes.push_back(std::move(p));
  }

  for (const auto& mod : m.modalities) {
    if (!mod.path.empty()) {
      ds.modalities.push_back(load_matrix(resolve(mod.path), mod.name, mod.kind));
      continue;
    }
    if (mod.kind != ModalityKind::kSemantic)
      throw ValidationError("modality '" + mod.name +
                            "' has no path; only semantic modalities may be "
                            "expanded from prototypes");
    // Instance-level semantic matrix: column j is the prototype of the class
    // of instance j.
    const PrototypeMatrix* protos = nullptr;
    for (const auto& p : ds.prototypes)
      if (p.modality_name == mod.name) protos = &p;
    if (protos == nullptr)
      throw ValidationError("modality '" + mod.name +
                            "' has no path and no prototype matrix to expand");
    ModalityMatrix x;
    x.name = mod.name;
    x.kind = ModalityKind::kSemantic;
    x.values.resize(protos->vectors.rows(),
                    static_cast<Eigen::Index>(ds.labels.size()));
    for (std::size_t jcol = 0; jcol < ds.labels.size(); ++jcol) {
      Eigen::Index c = protos->find(ds.labels[jcol]);
      if (c < 0)
        throw ValidationError("missing prototype: class " +
                              std::to_string(ds.labels[jcol]) +
                              " has no column in prototype matrix '" + mod.name +
                              "'");
      x.values.col(static_cast<Eigen::Index>(jcol)) = protos->vectors.col(c);
    }
    ds.modalities.push_back(std::move(x));
  }

  ds.validate();
  return ds;
}

}  // namespace lse

#endif  // LSE_MANIFEST_HPP
