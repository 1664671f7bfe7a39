// SPDX-License-Identifier: Apache-2.0
#include "hsnet/manifest.hpp"

#include <fstream>
#include <sstream>

#include "hsnet/config.hpp"
#include "hsnet/tensor_io.hpp"

namespace fs = std::filesystem;

namespace hsnet {
namespace {

std::vector<fs::path> split_paths(const std::string& v, const fs::path& base) {
  std::vector<fs::path> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    fs::path p(item);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

std::string show(const fs::path& p, const fs::path& base) {
  const auto rel = p.lexically_relative(base);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.generic_string();
}

std::string join(const std::vector<fs::path>& ps, const fs::path& base) {
  std::string s;
  for (std::size_t i = 0; i < ps.size(); ++i) s += (i ? "," : "") + show(ps[i], base);
  return s;
}

[[noreturn]] void fail(const fs::path& path, std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kManifest, path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

EpisodeManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const fs::path base = path.parent_path();
  EpisodeManifest m;
  bool have_backbone = false;
  for (const auto& kv : parse_key_values(in, path.string())) {
    if (kv.key == "backbone") {
      if (have_backbone || !m.episodes.empty()) fail(path, kv.line, "backbone must appear once, before episodes");
      m.backbone = parse_backbone(kv.value);
      have_backbone = true;
      continue;
    }
    if (kv.key == "episode") {
      m.episodes.push_back({});
      m.episodes.back().name = kv.value;
      continue;
    }
    if (m.episodes.empty()) fail(path, kv.line, "'" + kv.key + "' outside an episode");
    auto& ep = m.episodes.back();
    if (kv.key == "class") {
      try {
        ep.class_id = std::stoul(kv.value);
      } catch (const std::exception&) {
        fail(path, kv.line, "class must be a non-negative integer");
      }
    } else if (kv.key == "query_features") {
      ep.query_features = split_paths(kv.value, base);
    } else if (kv.key == "query_mask") {
      ep.query_mask = base / kv.value;
    } else if (kv.key == "support_features") {
      ep.supports.push_back({split_paths(kv.value, base), {}});
    } else if (kv.key == "support_mask") {
      if (ep.supports.empty() || !ep.supports.back().mask.empty()) {
        fail(path, kv.line, "support_mask must follow its support_features");
      }
      ep.supports.back().mask = base / kv.value;
    } else if (kv.key == "prediction") {
      ep.prediction = base / kv.value;
    } else {
      fail(path, kv.line, "unknown key '" + kv.key + "'");
    }
  }
  if (!have_backbone) throw Error(ErrorCode::kManifest, path.string() + ": missing backbone");
  for (const auto& ep : m.episodes) {
    if (ep.supports.empty()) throw Error(ErrorCode::kManifest, path.string() + ": episode " + ep.name + " has no support");
    if (ep.query_mask.empty() || ep.query_features.empty()) {
      throw Error(ErrorCode::kManifest, path.string() + ": episode " + ep.name + " lacks query entries");
    }
    for (const auto& s : ep.supports) {
      if (s.mask.empty()) throw Error(ErrorCode::kManifest, path.string() + ": episode " + ep.name + " lacks a support mask");
    }
  }
  return m;
}

void write_manifest(const EpisodeManifest& m, const fs::path& path) {
  const fs::path base = path.parent_path();
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << "backbone=" << to_string(m.backbone) << "\n";
  for (const auto& ep : m.episodes) {
    out << "episode=" << ep.name << "\n";
    out << "class=" << ep.class_id << "\n";
    out << "query_features=" << join(ep.query_features, base) << "\n";
    out << "query_mask=" << show(ep.query_mask, base) << "\n";
    for (const auto& s : ep.supports) {
      out << "support_features=" << join(s.features, base) << "\n";
      out << "support_mask=" << show(s.mask, base) << "\n";
    }
    if (ep.prediction) out << "prediction=" << show(*ep.prediction, base) << "\n";
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<std::string> validate_manifest(const EpisodeManifest& m) {
  const auto sched = backbone_schedule(m.backbone);
  const auto shapes = sched.feature_shapes();
  const Shape mask_shape = {sched.image_size, sched.image_size};
  std::vector<std::string> problems;
  auto check = [&](const std::string& ep, const fs::path& p, const Shape& expected, bool allow_leading_one) {
    try {
      auto h = read_tensor_header(p);
      if (allow_leading_one && h.dims.size() == 3 && h.dims[0] == 1) h.dims.erase(h.dims.begin());
      if (h.dims != expected) {
        problems.push_back(ep + ": " + p.string() + ": shape " + shape_string(h.dims) + ", expected " +
                           shape_string(expected));
      }
    } catch (const Error& e) {
      problems.push_back(ep + ": " + p.string() + ": " + e.what());
    }
  };
  auto check_features = [&](const std::string& ep, const std::vector<fs::path>& files, const char* what) {
    if (files.size() != shapes.size()) {
      problems.push_back(ep + ": " + what + ": " + std::to_string(files.size()) + " files, backbone " +
                         std::string(to_string(m.backbone)) + " needs " + std::to_string(shapes.size()));
      return;
    }
    for (std::size_t l = 0; l < files.size(); ++l) check(ep, files[l], shapes[l], false);
  };
  for (const auto& ep : m.episodes) {
    check_features(ep.name, ep.query_features, "query_features");
    check(ep.name, ep.query_mask, mask_shape, true);
    for (const auto& s : ep.supports) {
      check_features(ep.name, s.features, "support_features");
      check(ep.name, s.mask, mask_shape, true);
    }
    if (ep.prediction) check(ep.name, *ep.prediction, mask_shape, true);
  }
  return problems;
}

namespace {

template <typename T>
FeatureSet<T> read_features(const std::vector<fs::path>& files, const BackboneSchedule& sched) {
  FeatureSet<T> f;
  f.group_sizes = sched.group_sizes();
  for (std::size_t l = 0; l < files.size(); ++l) {
    f.layer_ids.push_back(l);
    f.features.push_back(read_tensor_as<T>(files[l]));
  }
  f.validate();
  return f;
}

}  // namespace

template <typename T>
Tensor<T> load_mask(const fs::path& p) {
  auto t = read_tensor_as<T>(p);
  if (t.rank() == 3 && t.dim(0) == 1) return t.reshaped({t.dim(1), t.dim(2)});
  if (t.rank() != 2) throw Error(ErrorCode::kInvalidShape, p.string() + ": mask of shape " + shape_string(t.dims()));
  return t;
}

template <typename T>
Episode<T> load_episode(const ManifestEpisode& entry, const BackboneSchedule& schedule) {
  Episode<T> ep;
  ep.class_id = entry.class_id;
  ep.query = read_features<T>(entry.query_features, schedule);
  ep.query_mask = load_mask<T>(entry.query_mask);
  for (const auto& s : entry.supports) ep.supports.push_back({read_features<T>(s.features, schedule), load_mask<T>(s.mask)});
  return ep;
}

template <typename T>
ManifestEpisode write_episode_files(const Episode<T>& episode, const fs::path& dir, const std::string& name) {
  const fs::path root = dir / name;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + root.string() + ": " + ec.message());
  ManifestEpisode out;
  out.name = name;
  out.class_id = episode.class_id;
  auto dump = [&](const FeatureSet<T>& f, const std::string& prefix) {
    std::vector<fs::path> paths;
    for (std::size_t l = 0; l < f.features.size(); ++l) {
      paths.push_back(root / (prefix + "_l" + std::to_string(l) + ".hstn"));
      write_tensor(f.features[l], paths.back());
    }
    return paths;
  };
  out.query_features = dump(episode.query, "query");
  out.query_mask = root / "query_mask.hstn";
  write_tensor(episode.query_mask, out.query_mask);
  for (std::size_t k = 0; k < episode.supports.size(); ++k) {
    ManifestSupport s;
    s.features = dump(episode.supports[k].features, "support" + std::to_string(k));
    s.mask = root / ("support" + std::to_string(k) + "_mask.hstn");
    write_tensor(episode.supports[k].mask, s.mask);
    out.supports.push_back(std::move(s));
  }
  return out;
}

template Tensor<float> load_mask(const fs::path&);
template Tensor<double> load_mask(const fs::path&);
template Episode<float> load_episode(const ManifestEpisode&, const BackboneSchedule&);
template Episode<double> load_episode(const ManifestEpisode&, const BackboneSchedule&);
template ManifestEpisode write_episode_files(const Episode<float>&, const fs::path&, const std::string&);
template ManifestEpisode write_episode_files(const Episode<double>&, const fs::path&, const std::string&);

}  // namespace hsnet
