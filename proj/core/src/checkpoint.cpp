#include "cwmi/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cwmi/hash.hpp"

namespace cwmi {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'C', 'W', 'M', 'I', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written as little-endian doubles");

void append_u32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}
void append_u64(std::string& out, std::uint64_t v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, const ParameterSet& ps) {
  ordered_json dir = ordered_json::array();
  std::string payload;
  std::uint64_t offset = 0;
  for (const NamedTensor& nt : ps.items()) {
    ordered_json entry;
    entry["name"] = nt.name;
    entry["shape"] = nt.tensor.shape();
    entry["trainable"] = nt.trainable;
    entry["offset"] = offset;
    entry["count"] = nt.tensor.size();
    dir.push_back(std::move(entry));
    payload.append(reinterpret_cast<const char*>(nt.tensor.data()),
                   static_cast<std::size_t>(nt.tensor.size()) * sizeof(double));
    offset += static_cast<std::uint64_t>(nt.tensor.size());
  }

  ordered_json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["config"] = ordered_json::parse(to_json_string(cfg));
  manifest["tensors"] = std::move(dir);
  manifest["payload_doubles"] = offset;
  manifest["payload_hash"] = hex64(fnv1a64(payload.data(), payload.size()));
  const std::string mtext = manifest.dump();

  std::string blob;
  blob.reserve(20 + mtext.size() + payload.size());
  blob.append(kMagic, sizeof(kMagic));
  append_u32(blob, static_cast<std::uint32_t>(kCheckpointVersion));
  append_u64(blob, static_cast<std::uint64_t>(mtext.size()));
  blob += mtext;
  blob += payload;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  constexpr std::size_t kHeader = 8 + 4 + 8;
  if (blob.size() < kHeader) {
    throw CheckpointTruncatedError("checkpoint header incomplete: " + path);
  }
  if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointVersionError("not a checkpoint file (bad magic): " + path);
  }
  std::uint32_t version;
  std::memcpy(&version, blob.data() + 8, sizeof(version));
  if (version != static_cast<std::uint32_t>(kCheckpointVersion)) {
    throw CheckpointVersionError("checkpoint format version " + std::to_string(version) +
                                 ", expected " + std::to_string(kCheckpointVersion));
  }
  std::uint64_t mlen;
  std::memcpy(&mlen, blob.data() + 12, sizeof(mlen));
  if (blob.size() < kHeader + mlen) {
    throw CheckpointTruncatedError("checkpoint manifest cut short: " + path);
  }

  ordered_json manifest;
  try {
    manifest = ordered_json::parse(blob.substr(kHeader, mlen));
  } catch (const std::exception& e) {
    throw IoError("checkpoint manifest unreadable: " + std::string(e.what()));
  }

  const std::uint64_t payload_doubles = manifest.at("payload_doubles").get<std::uint64_t>();
  const std::size_t payload_off = kHeader + static_cast<std::size_t>(mlen);
  const std::size_t want = payload_off + payload_doubles * sizeof(double);
  if (blob.size() < want) {
    throw CheckpointTruncatedError("checkpoint payload cut short: have " +
                                   std::to_string(blob.size() - payload_off) + " bytes, want " +
                                   std::to_string(payload_doubles * sizeof(double)));
  }
  if (blob.size() != want) {
    throw CheckpointTruncatedError("checkpoint has trailing bytes past declared payload");
  }

  const std::uint64_t digest =
      fnv1a64(blob.data() + payload_off, payload_doubles * sizeof(double));
  const std::string stored = manifest.at("payload_hash").get<std::string>();
  if (hex64(digest) != stored) {
    throw CheckpointHashError("checkpoint payload hash mismatch: stored " + stored +
                              ", computed " + hex64(digest));
  }

  Checkpoint ck;
  ck.config = run_config_from_json(manifest.at("config").dump());
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    const bool trainable = entry.at("trainable").get<bool>();
    const std::uint64_t off = entry.at("offset").get<std::uint64_t>();
    const std::uint64_t count = entry.at("count").get<std::uint64_t>();
    if (static_cast<std::int64_t>(count) != shape_numel(shape) ||
        off + count > payload_doubles) {
      throw CheckpointShapeError("tensor '" + name + "' directory entry inconsistent");
    }
    std::vector<double> data(count);
    std::memcpy(data.data(), blob.data() + payload_off + off * sizeof(double),
                count * sizeof(double));
    ck.params.add(name, Tensor::from(shape, std::move(data)), trainable);
  }
  return ck;
}

void check_params_match(const ParameterSet& ps, const std::vector<TensorSpec>& specs) {
  const auto& items = ps.items();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i >= items.size()) {
      throw CheckpointShapeError("missing tensor '" + specs[i].name + "'");
    }
    const NamedTensor& nt = items[i];
    const TensorSpec& spec = specs[i];
    if (nt.name != spec.name) {
      throw CheckpointShapeError("tensor order mismatch: found '" + nt.name + "', expected '" +
                                 spec.name + "'");
    }
    if (nt.tensor.shape() != spec.shape) {
      throw CheckpointShapeError("tensor '" + nt.name + "' has shape " +
                                 Tensor::shape_str(nt.tensor.shape()) + ", expected " +
                                 Tensor::shape_str(spec.shape));
    }
    if (nt.trainable != spec.trainable) {
      throw CheckpointShapeError("tensor '" + nt.name + "' trainability mismatch");
    }
  }
  if (items.size() != specs.size()) {
    throw CheckpointShapeError("unexpected extra tensor '" + items[specs.size()].name + "'");
  }
}

}  // namespace cwmi
