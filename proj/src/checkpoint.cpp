#include "edgpat/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace edgpat {

namespace {

constexpr char kMagic[8] = {'E', 'D', 'G', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void read_bytes(std::ifstream& in, void* data, std::size_t bytes) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
  if (!in) throw DataError("checkpoint: truncated file");
}

void write_matrix(std::ofstream& out, const Mat& m) {
  write_bytes(out, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void read_matrix(std::ifstream& in, Mat& m) {
  read_bytes(in, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

void write_vector(std::ofstream& out, const Vec& v) {
  write_bytes(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

void read_vector(std::ifstream& in, Vec& v) {
  read_bytes(in, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  nlohmann::json header;
  const ModelDims& dims = checkpoint.params.dims();
  header["d"] = dims.d;
  header["d_time"] = dims.d_time;
  header["levels"] = dims.levels;
  header["companies"] = dims.companies;
  header["leaves"] = dims.leaves;
  header["interior"] = checkpoint.memory.node_mem.rows();
  header["ablations"] = ablations_to_string(checkpoint.params.ablations());
  header["adam_step"] = checkpoint.adam_step;
  header["init_time"] = checkpoint.memory.init_time;
  header["company_ids"] = checkpoint.company_ids;
  header["leaf_ids"] = checkpoint.leaf_ids;
  nlohmann::json tensors = nlohmann::json::array();
  checkpoint.params.visit([&tensors](const ad::Tensor& t) {
    tensors.push_back({{"name", t.name},
                       {"rows", t.value.rows()},
                       {"cols", t.value.cols()}});
  });
  header["tensors"] = tensors;
  const std::string header_text = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint: cannot write '" + tmp + "'");
    write_bytes(out, kMagic, sizeof(kMagic));
    write_bytes(out, &kVersion, sizeof(kVersion));
    write_bytes(out, &checkpoint.config_hash, sizeof(checkpoint.config_hash));
    std::uint64_t header_len = header_text.size();
    write_bytes(out, &header_len, sizeof(header_len));
    write_bytes(out, header_text.data(), header_text.size());
    checkpoint.params.visit([&out](const ad::Tensor& t) {
      write_matrix(out, t.value);
      write_matrix(out, t.m1);
      write_matrix(out, t.m2);
    });
    write_matrix(out, checkpoint.memory.company_mem);
    write_matrix(out, checkpoint.memory.leaf_mem);
    write_matrix(out, checkpoint.memory.node_mem);
    write_vector(out, checkpoint.memory.last_seen_company);
    write_vector(out, checkpoint.memory.last_seen_leaf);
    write_vector(out, checkpoint.memory.last_seen_node);
    if (!out) throw DataError("checkpoint: write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path + "'");

  char magic[8];
  read_bytes(in, magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("checkpoint: bad magic in '" + path + "'");
  std::uint32_t version = 0;
  read_bytes(in, &version, sizeof(version));
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  read_bytes(in, &ck.config_hash, sizeof(ck.config_hash));
  std::uint64_t header_len = 0;
  read_bytes(in, &header_len, sizeof(header_len));
  std::string header_text(header_len, '\0');
  read_bytes(in, header_text.data(), header_len);
  nlohmann::json header = nlohmann::json::parse(header_text);

  ModelDims dims;
  dims.d = header.at("d").get<int>();
  dims.d_time = header.at("d_time").get<int>();
  dims.levels = header.at("levels").get<int>();
  dims.companies = header.at("companies").get<int>();
  dims.leaves = header.at("leaves").get<int>();
  const int interior = header.at("interior").get<int>();
  ck.params = ModelParams(dims, parse_ablations(header.at("ablations").get<std::string>()));
  ck.adam_step = header.at("adam_step").get<long>();
  ck.company_ids = header.at("company_ids").get<std::vector<std::string>>();
  ck.leaf_ids = header.at("leaf_ids").get<std::vector<std::string>>();

  // Shape audit before the raw reads.
  std::size_t i = 0;
  const auto& tensors = header.at("tensors");
  ck.params.visit([&](ad::Tensor& t) {
    if (i >= tensors.size()) throw DataError("checkpoint: tensor list too short");
    const auto& meta = tensors[i++];
    if (meta.at("name").get<std::string>() != t.name ||
        meta.at("rows").get<Eigen::Index>() != t.value.rows() ||
        meta.at("cols").get<Eigen::Index>() != t.value.cols())
      throw DataError("checkpoint: tensor mismatch at '" + t.name + "'");
  });
  if (i != tensors.size()) throw DataError("checkpoint: tensor list too long");

  ck.params.visit([&in](ad::Tensor& t) {
    read_matrix(in, t.value);
    read_matrix(in, t.m1);
    read_matrix(in, t.m2);
  });

  ck.memory.reset(dims.companies, dims.leaves, interior, dims.d,
                  header.at("init_time").get<double>());
  read_matrix(in, ck.memory.company_mem);
  read_matrix(in, ck.memory.leaf_mem);
  read_matrix(in, ck.memory.node_mem);
  read_vector(in, ck.memory.last_seen_company);
  read_vector(in, ck.memory.last_seen_leaf);
  read_vector(in, ck.memory.last_seen_node);
  return ck;
}

void check_compatible(const Checkpoint& checkpoint, const std::vector<std::string>& company_ids,
                      const std::vector<std::string>& leaf_ids) {
  if (checkpoint.company_ids != company_ids)
    throw DataError("checkpoint: company universe does not match the dataset");
  if (checkpoint.leaf_ids != leaf_ids)
    throw DataError("checkpoint: taxonomy leaves do not match the dataset");
}

}  // namespace edgpat
