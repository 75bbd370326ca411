#include "dvip/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "dvip/errors.hpp"

namespace dvip {

namespace {

constexpr char kMagic[4] = {'D', 'V', 'I', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  os.write(buf, 4);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  os.write(buf, 8);
}

void write_block(std::ostream& os, const std::string& name, const Tensor& t) {
  write_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(os, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

struct Reader {
  std::ifstream in;
  std::string path;

  void read(char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw FormatError("truncated checkpoint '" + path + "'");
  }
  std::uint32_t u32() {
    char buf[4];
    read(buf, 4);
    std::uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
  }
  std::uint64_t u64() {
    char buf[8];
    read(buf, 8);
    std::uint64_t v;
    std::memcpy(&v, buf, 8);
    return v;
  }
  std::string str(std::size_t n) {
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::pair<std::string, Tensor> block() {
    std::string name = str(u32());
    std::uint32_t rank = u32();
    if (rank > 8)
      throw FormatError("corrupt block '" + name + "' in checkpoint '" + path + "'");
    Shape shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) shape[i] = u32();
    Tensor t(shape);
    read(reinterpret_cast<char*>(t.data()), t.numel() * sizeof(double));
    return {std::move(name), std::move(t)};
  }
};

}  // namespace

void save_checkpoint(const std::string& path, DvipModel& model, TaskKind task,
                     const AdamState& adam, std::int64_t iteration,
                     const Standardizer& scaler) {
  auto params = model.parameters();
  if (adam.m.size() != params.size() || adam.v.size() != params.size())
    throw ContractViolation("save_checkpoint: optimizer state arity mismatch");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  const std::string desc =
      serialize_model_descriptor(model.config(), task, model.train_size());
  write_u32(out, static_cast<std::uint32_t>(desc.size()));
  out.write(desc.data(), static_cast<std::streamsize>(desc.size()));
  write_u64(out, static_cast<std::uint64_t>(iteration));
  write_u64(out, static_cast<std::uint64_t>(adam.step));

  const std::uint32_t nblocks = static_cast<std::uint32_t>(3 * params.size() + 3);
  write_u32(out, nblocks);
  for (std::size_t i = 0; i < params.size(); ++i)
    write_block(out, params[i].name, *params[i].tensor);
  for (std::size_t i = 0; i < params.size(); ++i)
    write_block(out, "adam.m." + params[i].name, adam.m[i]);
  for (std::size_t i = 0; i < params.size(); ++i)
    write_block(out, "adam.v." + params[i].name, adam.v[i]);
  write_block(out, "scaler.x_mean", scaler.x_mean);
  write_block(out, "scaler.x_scale", scaler.x_scale);
  Tensor ysc({2});
  ysc[0] = scaler.y_mean;
  ysc[1] = scaler.y_scale;
  write_block(out, "scaler.y", ysc);
  if (!out) throw DataError("failed writing checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Reader r;
  r.path = path;
  r.in.open(path, std::ios::binary);
  if (!r.in) throw FormatError("cannot open checkpoint '" + path + "'");

  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic in checkpoint '" + path + "'");
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                      " in '" + path + "'");
  std::string desc = r.str(r.u32());
  ModelDescriptor md = parse_model_descriptor(desc);
  auto iteration = static_cast<std::int64_t>(r.u64());
  auto adam_step_count = static_cast<std::int64_t>(r.u64());
  std::uint32_t nblocks = r.u32();

  std::vector<std::pair<std::string, Tensor>> blocks;
  blocks.reserve(nblocks);
  for (std::uint32_t i = 0; i < nblocks; ++i) blocks.push_back(r.block());
  std::vector<bool> used(blocks.size(), false);
  auto take = [&](const std::string& name) -> Tensor& {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (!used[i] && blocks[i].first == name) {
        used[i] = true;
        return blocks[i].second;
      }
    throw FormatError("missing block '" + name + "' in checkpoint '" + path + "'");
  };

  LoadedCheckpoint out{DvipModel(md.model, md.train_size), md.task, AdamState{},
                       iteration, Standardizer{}};
  auto params = out.model.parameters();
  auto assign = [&](const std::string& name, Tensor& dst) {
    Tensor& src = take(name);
    if (src.shape() != dst.shape())
      throw FormatError("shape mismatch for block '" + name + "' in checkpoint '" +
                        path + "'");
    dst = std::move(src);
  };
  for (const ParamRef& p : params) assign(p.name, *p.tensor);
  out.adam.step = adam_step_count;
  out.adam.m.resize(params.size());
  out.adam.v.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.adam.m[i] = Tensor(params[i].tensor->shape());
    out.adam.v[i] = Tensor(params[i].tensor->shape());
    assign("adam.m." + params[i].name, out.adam.m[i]);
    assign("adam.v." + params[i].name, out.adam.v[i]);
  }
  out.scaler.x_mean = Tensor({static_cast<std::size_t>(md.model.input_dim)});
  out.scaler.x_scale = Tensor({static_cast<std::size_t>(md.model.input_dim)});
  assign("scaler.x_mean", out.scaler.x_mean);
  assign("scaler.x_scale", out.scaler.x_scale);
  Tensor ysc({2});
  assign("scaler.y", ysc);
  out.scaler.y_mean = ysc[0];
  out.scaler.y_scale = ysc[1];
  out.scaler.scale_targets = (md.task == TaskKind::kRegression);
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (!used[i])
      throw FormatError("unexpected block '" + blocks[i].first + "' in checkpoint '" +
                        path + "'");
  return out;
}

}  // namespace dvip
