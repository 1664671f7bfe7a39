// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hsnet/architecture.hpp"
#include "hsnet/model.hpp"

namespace hsnet {

// Line-oriented key=value text:
//
//   backbone=resnet101
//   episode=<name>              starts an episode
//   class=<id>
//   query_features=<path>,<path>,...   one per backbone layer, shallow first
//   query_mask=<path>
//   support_features=<paths>    \ repeated once per shot, each followed by
//   support_mask=<path>         / its mask
//   prediction=<path>           optional precomputed (H, W) binary mask
//
// Relative paths resolve against the manifest's directory.
struct ManifestSupport {
  std::vector<std::filesystem::path> features;
  std::filesystem::path mask;
};

struct ManifestEpisode {
  std::string name;
  std::size_t class_id = 0;
  std::vector<std::filesystem::path> query_features;
  std::filesystem::path query_mask;
  std::vector<ManifestSupport> supports;
  std::optional<std::filesystem::path> prediction;
};

struct EpisodeManifest {
  Backbone backbone = Backbone::kResNet101;
  std::vector<ManifestEpisode> episodes;
};

EpisodeManifest read_manifest(const std::filesystem::path& path);
// Paths under the manifest's directory are written relative to it.
void write_manifest(const EpisodeManifest& manifest, const std::filesystem::path& path);

// One line per problem ("<episode>: <file>: <what>"); empty when valid.
// Checks existence, headers and shapes against the backbone schedule
// without reading payloads.
std::vector<std::string> validate_manifest(const EpisodeManifest& manifest);

// Accepts (H, W) or (1, H, W); returns (H, W).
template <typename T>
Tensor<T> load_mask(const std::filesystem::path& path);

template <typename T>
Episode<T> load_episode(const ManifestEpisode& entry, const BackboneSchedule& schedule);

// Writes every tensor of the episode under dir/<name>/ and returns the entry.
template <typename T>
ManifestEpisode write_episode_files(const Episode<T>& episode, const std::filesystem::path& dir,
                                    const std::string& name);

}  // namespace hsnet
