#pragma once
// Self-describing binary array container used for sessions, segment
// datasets, checkpoints and run records. Layout:
//
//   bytes 0..7   magic "MERITAR1"
//   bytes 8..15  uint64 little-endian header length H
//   H bytes      JSON header {"arrays":[{name,dtype,shape,offset,nbytes}...],
//                             "meta": <arbitrary JSON>}
//   rest         raw little-endian array payloads at the stated offsets
//
// f8 payloads round-trip bit-exactly.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace merit {

class Archive {
 public:
  void put_f64(const std::string& name, std::vector<std::size_t> shape, std::vector<double> data);
  void put_i64(const std::string& name, std::vector<std::size_t> shape, std::vector<std::int64_t> data);
  void put_scalar(const std::string& name, double v) { put_f64(name, {}, {v}); }

  bool has(const std::string& name) const;
  const std::vector<std::size_t>& shape(const std::string& name) const;
  const std::vector<double>& f64(const std::string& name) const;
  const std::vector<std::int64_t>& i64(const std::string& name) const;
  double scalar(const std::string& name) const { return f64(name).at(0); }
  std::vector<std::string> names() const;

  nlohmann::json meta;

  void save(const std::string& path) const;
  static Archive load(const std::string& path);

 private:
  struct Entry {
    char dtype;  // 'f' or 'i'
    std::vector<std::size_t> shape;
    std::vector<double> f;
    std::vector<std::int64_t> i;
  };
  std::map<std::string, Entry> entries_;
};

// Write-temp-then-rename for atomicity; also used for JSON sidecars.
void atomic_write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace merit
