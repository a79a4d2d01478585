#include "merit/core/container.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace merit {

namespace {
constexpr char kMagic[9] = "MERITAR1";

std::size_t numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}
}  // namespace

void Archive::put_f64(const std::string& name, std::vector<std::size_t> shape,
                      std::vector<double> data) {
  if (numel(shape) != data.size())
    throw std::invalid_argument("archive: shape/data size mismatch for " + name);
  entries_[name] = Entry{'f', std::move(shape), std::move(data), {}};
}

void Archive::put_i64(const std::string& name, std::vector<std::size_t> shape,
                      std::vector<std::int64_t> data) {
  if (numel(shape) != data.size())
    throw std::invalid_argument("archive: shape/data size mismatch for " + name);
  entries_[name] = Entry{'i', std::move(shape), {}, std::move(data)};
}

bool Archive::has(const std::string& name) const { return entries_.count(name) > 0; }

const std::vector<std::size_t>& Archive::shape(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("archive: no array " + name);
  return it->second.shape;
}

const std::vector<double>& Archive::f64(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end() || it->second.dtype != 'f')
    throw std::out_of_range("archive: no f8 array " + name);
  return it->second.f;
}

const std::vector<std::int64_t>& Archive::i64(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end() || it->second.dtype != 'i')
    throw std::out_of_range("archive: no i8 array " + name);
  return it->second.i;
}

std::vector<std::string> Archive::names() const {
  std::vector<std::string> out;
  for (auto& [k, v] : entries_) out.push_back(k);
  return out;
}

void Archive::save(const std::string& path) const {
  nlohmann::json hdr;
  hdr["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
  hdr["arrays"] = nlohmann::json::array();
  std::size_t offset = 0;
  for (auto& [name, e] : entries_) {
    std::size_t nbytes = 8 * (e.dtype == 'f' ? e.f.size() : e.i.size());
    hdr["arrays"].push_back({{"name", name},
                             {"dtype", e.dtype == 'f' ? "f8" : "i8"},
                             {"shape", e.shape},
                             {"offset", offset},
                             {"nbytes", nbytes}});
    offset += nbytes;
  }
  std::string hjson = hdr.dump();

  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("archive: cannot write " + path);
    os.write(kMagic, 8);
    std::uint64_t hl = hjson.size();
    os.write(reinterpret_cast<const char*>(&hl), 8);
    os.write(hjson.data(), static_cast<std::streamsize>(hjson.size()));
    for (auto& [name, e] : entries_) {
      if (e.dtype == 'f')
        os.write(reinterpret_cast<const char*>(e.f.data()), static_cast<std::streamsize>(8 * e.f.size()));
      else
        os.write(reinterpret_cast<const char*>(e.i.data()), static_cast<std::streamsize>(8 * e.i.size()));
    }
    if (!os) throw std::runtime_error("archive: write failure on " + path);
  }
  std::filesystem::rename(tmp, path);
}

Archive Archive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("archive: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("archive: bad magic in " + path);
  std::uint64_t hl = 0;
  is.read(reinterpret_cast<char*>(&hl), 8);
  std::string hjson(hl, '\0');
  is.read(hjson.data(), static_cast<std::streamsize>(hl));
  nlohmann::json hdr = nlohmann::json::parse(hjson);

  Archive a;
  a.meta = hdr.value("meta", nlohmann::json::object());
  std::streampos data_start = is.tellg();
  for (auto& j : hdr["arrays"]) {
    std::string name = j["name"];
    std::string dtype = j["dtype"];
    std::vector<std::size_t> shape = j["shape"].get<std::vector<std::size_t>>();
    std::size_t nbytes = j["nbytes"];
    std::size_t offset = j["offset"];
    is.seekg(data_start + static_cast<std::streamoff>(offset));
    if (dtype == "f8") {
      std::vector<double> v(nbytes / 8);
      is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(nbytes));
      a.put_f64(name, shape, std::move(v));
    } else if (dtype == "i8") {
      std::vector<std::int64_t> v(nbytes / 8);
      is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(nbytes));
      a.put_i64(name, shape, std::move(v));
    } else {
      throw std::runtime_error("archive: unknown dtype " + dtype);
    }
    if (!is) throw std::runtime_error("archive: truncated payload in " + path);
  }
  return a;
}

void atomic_write_text(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + path);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace merit
