#include "gbt/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace gbt {

using nlohmann::json;

namespace {
constexpr char kMagic[4] = {'G', 'B', 'C', 'K'};
constexpr uint32_t kVersion = 1;
}  // namespace

void save_checkpoint(const ParamStore& ps, const std::string& path) {
  json manifest;
  manifest["dtype"] = "f64";
  json tensors = json::array();
  uint64_t offset = 0;
  for (const auto& t : ps.tensors()) {
    tensors.push_back({{"name", t->name}, {"rows", t->value.rows}, {"cols", t->value.cols}, {"offset", offset}});
    offset += t->value.size() * sizeof(double);
  }
  manifest["tensors"] = tensors;
  json aliases = json::array();
  for (const auto& [name, target] : ps.aliases()) aliases.push_back({name, target});
  manifest["aliases"] = aliases;

  const std::string m = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 4);
  uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  uint64_t mlen = m.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const auto& t : ps.tensors())
    out.write(reinterpret_cast<const char*>(t->value.a.data()),
              static_cast<std::streamsize>(t->value.size() * sizeof(double)));
  if (!out) throw IoError("write failed: " + path);
}

void load_checkpoint(ParamStore& ps, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw CorruptManifest(path + ": bad magic");
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kVersion) throw CorruptManifest(path + ": unsupported version");
  uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  if (!in || mlen == 0 || mlen > (1ull << 30)) throw CorruptManifest(path + ": bad manifest length");
  std::string m(mlen, '\0');
  in.read(m.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw CorruptManifest(path + ": truncated manifest");

  json manifest;
  try {
    manifest = json::parse(m);
  } catch (const json::parse_error& e) {
    throw CorruptManifest(path + ": " + e.what());
  }
  if (manifest.value("dtype", "") != "f64") throw CorruptManifest(path + ": unsupported dtype");
  if (!manifest.contains("tensors") || !manifest["tensors"].is_array())
    throw CorruptManifest(path + ": missing tensor list");

  const auto& tensors = manifest["tensors"];
  if (tensors.size() != ps.n_tensors())
    throw ShapeMismatch("checkpoint has " + std::to_string(tensors.size()) + " tensors, store has " +
                        std::to_string(ps.n_tensors()));
  size_t i = 0;
  for (const auto& entry : tensors) {
    const std::string name = entry.value("name", "");
    const int rows = entry.value("rows", -1);
    const int cols = entry.value("cols", -1);
    const auto& t = *ps.tensors()[i++];
    if (t.name != name) throw ShapeMismatch("checkpoint tensor '" + name + "' where store has '" + t.name + "'");
    if (t.value.rows != rows || t.value.cols != cols)
      throw ShapeMismatch("tensor '" + name + "' is " + std::to_string(rows) + "x" + std::to_string(cols) +
                          " in checkpoint, " + t.value.shape() + " in store");
  }

  std::vector<std::pair<std::string, std::string>> file_aliases;
  if (manifest.contains("aliases"))
    for (const auto& a : manifest["aliases"]) file_aliases.emplace_back(a.at(0).get<std::string>(), a.at(1).get<std::string>());
  if (file_aliases != ps.aliases()) throw ShapeMismatch("checkpoint aliases do not match the store");

  for (const auto& t : ps.tensors()) {
    in.read(reinterpret_cast<char*>(t->value.a.data()),
            static_cast<std::streamsize>(t->value.size() * sizeof(double)));
    if (!in) throw CorruptManifest(path + ": truncated blob at tensor '" + t->name + "'");
  }
  char extra;
  if (in.read(&extra, 1)) throw CorruptManifest(path + ": trailing bytes after blob");
}

}  // namespace gbt
