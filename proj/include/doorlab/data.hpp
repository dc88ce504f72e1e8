// Copyright 2026 The Doorlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DOORLAB_DATA_HPP_
#define DOORLAB_DATA_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "doorlab/errors.hpp"
#include "doorlab/expert.hpp"
#include "doorlab/render.hpp"
#include "doorlab/scene.hpp"
#include "doorlab/world.hpp"

namespace doorlab {

inline constexpr std::uint32_t kEpisodeMagic = 0x50454C44;   // "DLEP"
inline constexpr std::uint32_t kEpisodeEndMagic = 0x444E4C44;  // "DLND"
inline constexpr std::uint32_t kEpisodeSchemaVersion = 1;

// One recorded control step: the observed frame, the world state it was
// rendered from, and the action the demonstrator took in that state.
struct FrameRecord {
  WorldState state;
  Action action;
  std::uint64_t noise_seed = 0;
  Frame frame;

  bool operator==(const FrameRecord&) const = default;
};

struct Episode {
  std::string scene_id;
  Domain domain = Domain::kSim;
  std::uint64_t seed = 0;
  char dynamics_variant = 'A';
  bool success = false;
  std::vector<FrameRecord> frames;

  int length() const { return static_cast<int>(frames.size()); }

  bool operator==(const Episode&) const = default;
};

// A frame plus the provenance needed to re-render it: which scene, which
// episode seed, which step, and the recorded world state. The oracle domain
// adapter requires all of these.
struct Observation {
  Frame frame;
  Domain domain = Domain::kSim;
  std::string scene_id;
  std::uint64_t episode_seed = 0;
  int step = 0;
  std::uint64_t noise_seed = 0;
  WorldState state;
};

inline Observation observation_at(const Episode& ep, int i) {
  if (i < 0 || i >= ep.length()) {
    throw ContractViolation("observation_at: frame index out of range");
  }
  const FrameRecord& rec = ep.frames[static_cast<std::size_t>(i)];
  return Observation{rec.frame, ep.domain,     ep.scene_id, ep.seed,
                     i,         rec.noise_seed, rec.state};
}

// Per-frame supervision: the next `lookahead` actions, padded past the end
// of the episode with zero motion and terminate = 1.
struct DemoLabel {
  int lookahead = 0;
  int arm_dof = 0;
  std::vector<double> arm;        // lookahead * arm_dof
  std::vector<double> base;       // lookahead * 2
  std::vector<double> terminate;  // lookahead

  bool operator==(const DemoLabel&) const = default;
};

// ---------------------------------------------------------------------------
// Collection.

// Derives the per-frame sensor noise stream from the episode seed so that a
// recollected episode is bit-identical.
inline std::uint64_t frame_noise_seed(std::uint64_t episode_seed, int frame) {
  return seed_mix(episode_seed, static_cast<std::uint64_t>(frame), 0xA11CE);
}

inline Episode collect_episode(const SceneSpec& scene, Domain domain,
                               std::uint64_t seed,
                               const WorldConfig& wcfg = WorldConfig{},
                               const RenderConfig& rcfg = RenderConfig{},
                               const ExpertParams& params = ExpertParams{}) {
  Episode ep;
  ep.scene_id = scene.scene_id;
  ep.domain = domain;
  ep.seed = seed;
  ep.dynamics_variant = scene.dynamics_variant == DynamicsVariant::kA ? 'A'
                                                                      : 'B';
  ExpertPolicy expert(seed, wcfg, params);
  WorldState s = reset(scene, seed, wcfg);
  while (true) {
    FrameRecord rec;
    rec.state = s;
    rec.noise_seed = frame_noise_seed(seed, ep.length());
    rec.frame = render(s, scene, domain, rec.noise_seed, rcfg, wcfg);
    rec.action = expert.act(s, scene);
    ep.frames.push_back(std::move(rec));
    if (ep.frames.back().action.terminate) break;
    s = step(s, ep.frames.back().action, scene, wcfg);
    if (s.failed) {
      FrameRecord last;
      last.state = s;
      last.noise_seed = frame_noise_seed(seed, ep.length());
      last.frame = render(s, scene, domain, last.noise_seed, rcfg, wcfg);
      last.action = Action::zero(wcfg.arm_dof);
      ep.frames.push_back(std::move(last));
      break;
    }
  }
  ep.success = is_success(ep.frames.back().state, scene, wcfg);
  return ep;
}

// Batch demonstration collection. Demonstrations come only from train-split
// scenes, and only successful episodes are kept: a failed attempt is
// discarded and recollected under a fresh derived seed.
inline std::vector<Episode> collect(const SceneRegistry& registry,
                                    const std::vector<std::string>& scene_ids,
                                    int episodes_per_scene, Domain domain,
                                    std::uint64_t seed,
                                    const WorldConfig& wcfg = WorldConfig{},
                                    const RenderConfig& rcfg = RenderConfig{},
                                    const ExpertParams& params =
                                        ExpertParams{}) {
  if (episodes_per_scene <= 0) {
    throw ContractViolation("collect: episodes_per_scene <= 0");
  }
  constexpr int kMaxAttempts = 64;
  std::vector<Episode> out;
  out.reserve(scene_ids.size() * static_cast<std::size_t>(episodes_per_scene));
  for (const std::string& id : scene_ids) {
    const SceneSpec& scene = registry.get(id);
    if (scene.split != Split::kTrain) {
      throw ProtocolError("collect: scene '" + id +
                          "' is eval-split; demonstrations may only come "
                          "from train scenes");
    }
    for (int k = 0; k < episodes_per_scene; ++k) {
      Episode ep;
      int attempt = 0;
      for (; attempt < kMaxAttempts; ++attempt) {
        std::uint64_t ep_seed =
            seed_mix(seed, hash_str(id),
                     static_cast<std::uint64_t>(k) * kMaxAttempts + attempt,
                     0xC011EC7);
        ep = collect_episode(scene, domain, ep_seed, wcfg, rcfg, params);
        if (ep.success) break;
      }
      if (!ep.success) {
        throw TrainingError("collect: expert failed " +
                            std::to_string(kMaxAttempts) +
                            " consecutive attempts on scene '" + id + "'");
      }
      out.push_back(std::move(ep));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels.

inline std::vector<DemoLabel> build_labels(const Episode& ep, int lookahead,
                                           int arm_dof) {
  if (lookahead <= 0) throw ContractViolation("build_labels: lookahead <= 0");
  std::vector<DemoLabel> labels(ep.frames.size());
  int n = ep.length();
  for (int i = 0; i < n; ++i) {
    DemoLabel& l = labels[i];
    l.lookahead = lookahead;
    l.arm_dof = arm_dof;
    l.arm.assign(static_cast<std::size_t>(lookahead) * arm_dof, 0.0);
    l.base.assign(static_cast<std::size_t>(lookahead) * 2, 0.0);
    l.terminate.assign(lookahead, 1.0);
    for (int k = 0; k < lookahead; ++k) {
      if (i + k >= n) break;  // beyond the demo: zero actions, terminate
      const Action& a = ep.frames[i + k].action;
      for (int d = 0; d < arm_dof; ++d) l.arm[k * arm_dof + d] = a.arm[d];
      l.base[k * 2 + 0] = a.base[0];
      l.base[k * 2 + 1] = a.base[1];
      l.terminate[k] = a.terminate ? 1.0 : 0.0;
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Binary episode files.

namespace detail {

class ByteWriter {
 public:
  explicit ByteWriter(std::ostream& os) : os_(os) {}

  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void f64(double v) { raw(&v, 8); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void bytes(const void* p, std::size_t n) { raw(p, n); }
  std::uint64_t offset() const { return offset_; }

 private:
  void raw(const void* p, std::size_t n) {
    os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    offset_ += n;
  }
  std::ostream& os_;
  std::uint64_t offset_ = 0;
};

class ByteReader {
 public:
  ByteReader(std::istream& is, std::string path)
      : is_(is), path_(std::move(path)) {}

  std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
  float f32() { float v; raw(&v, 4); return v; }
  double f64() { double v; raw(&v, 8); return v; }
  std::string str(std::uint32_t max_len) {
    std::uint32_t n = u32();
    if (n > max_len) {
      throw FormatError(path_ + ": string length " + std::to_string(n) +
                            " exceeds limit",
                        offset_ - 4);
    }
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void bytes(void* p, std::size_t n) { raw(p, n); }
  std::uint64_t offset() const { return offset_; }

 private:
  void raw(void* p, std::size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is_.gcount()) != n) {
      throw FormatError(path_ + ": truncated", offset_);
    }
    offset_ += n;
  }
  std::istream& is_;
  std::string path_;
  std::uint64_t offset_ = 0;
};

inline void write_state(ByteWriter& w, const WorldState& s) {
  w.f64(s.robot.base_x);
  w.f64(s.robot.base_y);
  w.f64(s.robot.base_yaw);
  w.u32(static_cast<std::uint32_t>(s.robot.arm_joints.size()));
  for (double q : s.robot.arm_joints) w.f64(q);
  w.f64(s.door.handle_angle);
  w.f64(s.door.open_angle);
  w.u8(s.door.latched ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(s.step));
  w.u8(s.failed ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(s.failure_reason));
}

inline WorldState read_state(ByteReader& r) {
  WorldState s;
  s.robot.base_x = r.f64();
  s.robot.base_y = r.f64();
  s.robot.base_yaw = r.f64();
  std::uint32_t dof = r.u32();
  if (dof > 64) {
    throw FormatError("arm dof " + std::to_string(dof) + " out of range",
                      r.offset() - 4);
  }
  s.robot.arm_joints.resize(dof);
  for (auto& q : s.robot.arm_joints) q = r.f64();
  s.door.handle_angle = r.f64();
  s.door.open_angle = r.f64();
  s.door.latched = r.u8() != 0;
  s.step = static_cast<int>(r.u32());
  s.failed = r.u8() != 0;
  s.failure_reason = static_cast<FailureReason>(r.u8());
  return s;
}

}  // namespace detail

inline void save_episode(const Episode& ep, const std::string& path,
                         int height, int width) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("save_episode: cannot open " + path);
  detail::ByteWriter w(os);
  w.u32(kEpisodeMagic);
  w.u32(kEpisodeSchemaVersion);
  w.str(ep.scene_id);
  w.u8(ep.domain == Domain::kSim ? 0 : 1);
  w.u64(ep.seed);
  w.u8(static_cast<std::uint8_t>(ep.dynamics_variant));
  w.u8(ep.success ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(height));
  w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(ep.frames.size()));
  for (const FrameRecord& rec : ep.frames) {
    if (rec.frame.rgb.height != height || rec.frame.rgb.width != width) {
      throw ContractViolation("save_episode: frame resolution mismatch");
    }
    // Payload length prefix lets readers validate each record boundary.
    std::size_t dof = rec.state.robot.arm_joints.size();
    std::size_t state_len = 3 * 8 + 4 + dof * 8 + 2 * 8 + 1 + 4 + 1 + 1;
    std::size_t action_len = 2 * 8 + 4 + rec.action.arm.size() * 8 + 1;
    std::size_t img_len = rec.frame.rgb.data.size() +
                          rec.frame.depth.data.size() * 4;
    w.u32(static_cast<std::uint32_t>(state_len + action_len + 8 + img_len));
    detail::write_state(w, rec.state);
    w.f64(rec.action.base[0]);
    w.f64(rec.action.base[1]);
    w.u32(static_cast<std::uint32_t>(rec.action.arm.size()));
    for (double q : rec.action.arm) w.f64(q);
    w.u8(rec.action.terminate ? 1 : 0);
    w.u64(rec.noise_seed);
    w.bytes(rec.frame.rgb.data.data(), rec.frame.rgb.data.size());
    w.bytes(rec.frame.depth.data.data(), rec.frame.depth.data.size() * 4);
  }
  w.u32(kEpisodeEndMagic);
  if (!os) throw Error("save_episode: write failed for " + path);
}

inline Episode load_episode(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_episode: cannot open " + path);
  detail::ByteReader r(is, path);
  std::uint32_t magic = r.u32();
  if (magic != kEpisodeMagic) {
    throw FormatError(path + ": bad magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08X", magic);
      return std::string(buf);
    }(), 0);
  }
  std::uint32_t version = r.u32();
  if (version != kEpisodeSchemaVersion) {
    throw FormatError(path + ": unsupported schema version " +
                          std::to_string(version),
                      4);
  }
  Episode ep;
  ep.scene_id = r.str(256);
  ep.domain = r.u8() == 0 ? Domain::kSim : Domain::kReal;
  ep.seed = r.u64();
  ep.dynamics_variant = static_cast<char>(r.u8());
  if (ep.dynamics_variant != 'A' && ep.dynamics_variant != 'B') {
    throw FormatError(path + ": bad dynamics variant", r.offset() - 1);
  }
  ep.success = r.u8() != 0;
  std::uint32_t height = r.u32();
  std::uint32_t width = r.u32();
  if (height == 0 || width == 0 || height > 4096 || width > 4096) {
    throw FormatError(path + ": bad resolution", r.offset() - 8);
  }
  std::uint32_t count = r.u32();
  ep.frames.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint64_t rec_start = r.offset();
    std::uint32_t rec_len = r.u32();
    FrameRecord rec;
    rec.state = detail::read_state(r);
    rec.action.base[0] = r.f64();
    rec.action.base[1] = r.f64();
    std::uint32_t adof = r.u32();
    if (adof > 64) {
      throw FormatError(path + ": action dof out of range", r.offset() - 4);
    }
    rec.action.arm.resize(adof);
    for (auto& q : rec.action.arm) q = r.f64();
    rec.action.terminate = r.u8() != 0;
    rec.noise_seed = r.u64();
    rec.frame.rgb = RgbImage(height, width, 3);
    rec.frame.depth = DepthImage(height, width, 1);
    r.bytes(rec.frame.rgb.data.data(), rec.frame.rgb.data.size());
    r.bytes(rec.frame.depth.data.data(), rec.frame.depth.data.size() * 4);
    std::uint64_t got = r.offset() - rec_start - 4;
    if (got != rec_len) {
      throw FormatError(path + ": record " + std::to_string(i) +
                            " length mismatch (" + std::to_string(got) +
                            " vs " + std::to_string(rec_len) + ")",
                        rec_start);
    }
    ep.frames.push_back(std::move(rec));
  }
  if (r.u32() != kEpisodeEndMagic) {
    throw FormatError(path + ": missing end marker", r.offset() - 4);
  }
  return ep;
}

// ---------------------------------------------------------------------------
// Manifests.

struct ManifestEntry {
  std::string file;
  std::string scene_id;
  Domain domain = Domain::kSim;
  std::uint64_t seed = 0;
  int frames = 0;
  bool success = false;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  int total_frames() const {
    int n = 0;
    for (const auto& e : entries) n += e.frames;
    return n;
  }
};

inline void save_manifest(const Manifest& m, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = kEpisodeSchemaVersion;
  j["episodes"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    j["episodes"].push_back({{"file", e.file},
                             {"scene_id", e.scene_id},
                             {"domain", to_string(e.domain)},
                             {"seed", e.seed},
                             {"frames", e.frames},
                             {"success", e.success}});
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("save_manifest: cannot open " + path);
  os << j.dump(2) << "\n";
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("load_manifest: cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what(), 0);
  }
  if (!j.contains("schema_version") ||
      j["schema_version"].get<std::uint32_t>() != kEpisodeSchemaVersion) {
    throw FormatError(path + ": bad or missing schema_version", 0);
  }
  Manifest m;
  for (const auto& e : j.at("episodes")) {
    ManifestEntry me;
    me.file = e.at("file").get<std::string>();
    me.scene_id = e.at("scene_id").get<std::string>();
    std::string d = e.at("domain").get<std::string>();
    if (d == "sim") {
      me.domain = Domain::kSim;
    } else if (d == "real") {
      me.domain = Domain::kReal;
    } else {
      throw FormatError(path + ": bad domain '" + d + "'", 0);
    }
    me.seed = e.at("seed").get<std::uint64_t>();
    me.frames = e.at("frames").get<int>();
    me.success = e.at("success").get<bool>();
    m.entries.push_back(std::move(me));
  }
  return m;
}

inline ManifestEntry manifest_entry_for(const Episode& ep,
                                        const std::string& file) {
  return ManifestEntry{file,      ep.scene_id, ep.domain,
                       ep.seed,   ep.length(), ep.success};
}

// ---------------------------------------------------------------------------
// Dataset assembly and batch sampling.

// An in-memory training dataset: episodes with prebuilt lookahead labels and
// a flat frame index for uniform sampling. Entries flagged `adapted` are
// precomputed domain-translated copies (the gan_mix third data source).
class Dataset {
 public:
  struct SampleRef {
    int entry = 0;
    int frame = 0;

    bool operator==(const SampleRef&) const = default;
  };

  Dataset(int lookahead, int arm_dof)
      : lookahead_(lookahead), arm_dof_(arm_dof) {
    if (lookahead <= 0 || arm_dof <= 0) {
      throw ContractViolation("Dataset: lookahead and arm_dof must be > 0");
    }
  }

  int lookahead() const { return lookahead_; }
  int arm_dof() const { return arm_dof_; }

  void add(Episode ep, bool adapted = false) {
    add(std::make_shared<const Episode>(std::move(ep)), adapted);
  }

  // Shared-ownership variant: lets several datasets reference one episode
  // corpus without copying the frames.
  void add(std::shared_ptr<const Episode> ep, bool adapted = false) {
    if (!ep) throw ContractViolation("Dataset::add: null episode");
    Entry e;
    e.labels = build_labels(*ep, lookahead_, arm_dof_);
    e.episode = std::move(ep);
    e.adapted = adapted;
    int idx = static_cast<int>(entries_.size());
    for (int f = 0; f < e.episode->length(); ++f) {
      flat_.push_back(SampleRef{idx, f});
    }
    entries_.push_back(std::move(e));
  }

  std::size_t episode_count() const { return entries_.size(); }
  std::size_t frame_count() const { return flat_.size(); }

  std::size_t frame_count(Domain d, bool adapted) const {
    std::size_t n = 0;
    for (const Entry& e : entries_) {
      if (e.episode->domain == d && e.adapted == adapted) {
        n += static_cast<std::size_t>(e.episode->length());
      }
    }
    return n;
  }

  const Episode& episode(int entry) const {
    return *entries_.at(static_cast<std::size_t>(entry)).episode;
  }
  bool adapted(int entry) const {
    return entries_.at(static_cast<std::size_t>(entry)).adapted;
  }

  const SampleRef& flat(std::size_t i) const { return flat_.at(i); }

  Observation observation(const SampleRef& ref) const {
    return observation_at(episode(ref.entry), ref.frame);
  }

  const DemoLabel& label(const SampleRef& ref) const {
    return entries_.at(static_cast<std::size_t>(ref.entry))
        .labels.at(static_cast<std::size_t>(ref.frame));
  }

 private:
  struct Entry {
    std::shared_ptr<const Episode> episode;
    bool adapted = false;
    std::vector<DemoLabel> labels;
  };

  int lookahead_;
  int arm_dof_;
  std::vector<Entry> entries_;
  std::vector<SampleRef> flat_;
};

// Draws batch_size frame references uniformly over all frames. A fixed
// (dataset, seed) pair yields a fixed batch, independent of prior draws.
inline std::vector<Dataset::SampleRef> sample_refs(const Dataset& ds,
                                                   int batch_size,
                                                   std::uint64_t seed) {
  if (ds.frame_count() == 0) throw ConfigError("sample_refs: empty dataset");
  if (batch_size <= 0) throw ContractViolation("sample_refs: batch_size <= 0");
  Rng rng(seed_mix(seed, 0xBA7C4));
  std::vector<Dataset::SampleRef> out;
  out.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) {
    out.push_back(ds.flat(rng.uniform_index(ds.frame_count())));
  }
  return out;
}

inline std::vector<std::pair<Observation, DemoLabel>> sample_batch(
    const Dataset& ds, int batch_size, std::uint64_t seed) {
  std::vector<std::pair<Observation, DemoLabel>> out;
  for (const auto& ref : sample_refs(ds, batch_size, seed)) {
    out.emplace_back(ds.observation(ref), ds.label(ref));
  }
  return out;
}

// Seeded per-episode train/validation split; never splits within an episode.
inline std::pair<std::vector<Episode>, std::vector<Episode>> split_episodes(
    std::vector<Episode> episodes, double val_fraction, std::uint64_t seed) {
  if (val_fraction < 0.0 || val_fraction > 1.0) {
    throw ContractViolation("split_episodes: val_fraction outside [0, 1]");
  }
  std::vector<std::size_t> order(episodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed_mix(seed, 0x59117));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  std::size_t n_val = static_cast<std::size_t>(
      std::llround(val_fraction * static_cast<double>(episodes.size())));
  std::pair<std::vector<Episode>, std::vector<Episode>> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < n_val ? out.second : out.first;
    dst.push_back(std::move(episodes[order[i]]));
  }
  return out;
}

}  // namespace doorlab

#endif  // DOORLAB_DATA_HPP_
