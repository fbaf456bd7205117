#include "pcm/io.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace pcm {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

nlohmann::json parse_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  require(!j.is_discarded(), "invalid JSON");
  return j;
}

template <typename T>
void write_raw(std::ostream& os, const T& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
  T value;
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  require(static_cast<bool>(is), "unexpected end of file");
  return value;
}

}  // namespace

void write_ply(const std::string& path, const PointCloud& cloud, bool binary) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "cannot open " + path + " for writing");
  os << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
     << "element vertex " << cloud.size() << "\n"
     << "property double x\nproperty double y\nproperty double z\n"
     << "end_header\n";
  if (binary) {
    for (const auto& p : cloud) {
      write_raw(os, p.x());
      write_raw(os, p.y());
      write_raw(os, p.z());
    }
  } else {
    os.precision(17);
    for (const auto& p : cloud) os << p.x() << " " << p.y() << " " << p.z() << "\n";
  }
}

PointCloud read_ply(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open " + path);
  std::string line;
  std::getline(is, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "ply", "not a PLY file: " + path);

  bool binary = false;
  struct Property {
    std::string type;
    std::string name;
    bool is_list = false;
    std::string count_type;  // list length type when is_list
  };
  struct Element {
    std::string name;
    long long count = 0;
    std::vector<Property> props;
  };
  std::vector<Element> elements;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian")
        binary = true;
      else
        require(fmt == "ascii", "unsupported PLY format: " + fmt);
    } else if (tok == "element") {
      Element e;
      ls >> e.name >> e.count;
      elements.push_back(e);
    } else if (tok == "property") {
      require(!elements.empty(), "property before element in PLY header");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        // Tolerated on elements we skip (faces etc.); vertex lists rejected
        // below.
        Property p;
        p.is_list = true;
        ls >> p.count_type >> p.type >> p.name;
        elements.back().props.push_back(p);
      } else {
        ls >> name;
        elements.back().props.push_back({type, name});
      }
    } else if (tok == "end_header") {
      break;
    }
  }

  auto scalar_size = [](const std::string& type) -> size_t {
    if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
        type == "float" || type == "float32")
      return 4;
    if (type == "double" || type == "float64") return 8;
    throw ValidationError("unknown PLY property type: " + type);
  };

  PointCloud cloud;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      // Skip foreign elements; binary lists need their length read to skip.
      if (binary) {
        for (long long i = 0; i < e.count; ++i) {
          for (const auto& p : e.props) {
            if (p.is_list) {
              long long n = 0;
              size_t cs = scalar_size(p.count_type);
              unsigned char buf[8] = {0};
              is.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(cs));
              for (size_t b = 0; b < cs; ++b) n |= static_cast<long long>(buf[b]) << (8 * b);
              is.seekg(static_cast<std::streamoff>(n * scalar_size(p.type)), std::ios::cur);
            } else {
              is.seekg(static_cast<std::streamoff>(scalar_size(p.type)), std::ios::cur);
            }
          }
        }
      } else {
        for (long long i = 0; i < e.count; ++i) std::getline(is, line);
      }
      continue;
    }
    int ix = -1, iy = -1, iz = -1;
    for (const auto& p : e.props)
      require(!p.is_list, "list properties are not supported on the vertex element");
    for (size_t p = 0; p < e.props.size(); ++p) {
      if (e.props[p].name == "x") ix = static_cast<int>(p);
      if (e.props[p].name == "y") iy = static_cast<int>(p);
      if (e.props[p].name == "z") iz = static_cast<int>(p);
    }
    require(ix >= 0 && iy >= 0 && iz >= 0, "PLY vertex element lacks x/y/z");
    cloud.reserve(e.count);
    for (long long i = 0; i < e.count; ++i) {
      std::vector<double> vals(e.props.size(), 0.0);
      if (binary) {
        for (size_t p = 0; p < e.props.size(); ++p) {
          const std::string& t = e.props[p].type;
          if (t == "float" || t == "float32")
            vals[p] = read_raw<float>(is);
          else if (t == "double" || t == "float64")
            vals[p] = read_raw<double>(is);
          else
            is.seekg(static_cast<std::streamoff>(scalar_size(t)), std::ios::cur);
        }
      } else {
        std::getline(is, line);
        std::istringstream ls(line);
        for (size_t p = 0; p < e.props.size(); ++p) ls >> vals[p];
      }
      cloud.emplace_back(vals[ix], vals[iy], vals[iz]);
    }
  }
  return cloud;
}

namespace {

void write_lprd_record(std::ostream& os, const Eigen::MatrixXd& m) {
  os.write("LPRD", 4);
  write_raw<std::uint32_t>(os, 1);
  write_raw<std::uint32_t>(os, 2);
  write_raw<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
  write_raw<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) write_raw<double>(os, m(i, j));
}

Eigen::MatrixXd read_lprd_record(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  require(static_cast<bool>(is) && std::memcmp(magic, "LPRD", 4) == 0, "bad LPRD magic");
  require(read_raw<std::uint32_t>(is) == 1, "unsupported LPRD version");
  std::uint32_t rank = read_raw<std::uint32_t>(is);
  require(rank >= 1 && rank <= 2, "LPRD rank must be 1 or 2");
  std::uint64_t rows = read_raw<std::uint64_t>(is);
  std::uint64_t cols = rank == 2 ? read_raw<std::uint64_t>(is) : 1;
  Eigen::MatrixXd m(rows, cols);
  for (std::uint64_t i = 0; i < rows; ++i)
    for (std::uint64_t j = 0; j < cols; ++j) m(i, j) = read_raw<double>(is);
  return m;
}

}  // namespace

void write_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "cannot open " + path + " for writing");
  write_lprd_record(os, m);
}

Eigen::MatrixXd read_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open " + path);
  return read_lprd_record(is);
}

namespace {

void collect_weight_entries(const PipelineWeights& w,
                            std::vector<std::pair<std::string, const Eigen::MatrixXd*>>& out,
                            std::vector<Eigen::MatrixXd>& vec_storage) {
  for (int l = 0; l < kPipelineLayers; ++l) {
    std::string base = "tmp" + std::to_string(l) + ".";
    for (auto [tag, att] : {std::pair{"self.", &w.tmp[l].self}, {"cross.", &w.tmp[l].cross}}) {
      std::string p = base + tag;
      out.emplace_back(p + "wq", &att->W_q);
      out.emplace_back(p + "wk", &att->W_k);
      out.emplace_back(p + "wv", &att->W_v);
      out.emplace_back(p + "mlp.w1", &att->mlp.w1);
      out.emplace_back(p + "mlp.w2", &att->mlp.w2);
      out.emplace_back(p + "mlp.w3", &att->mlp.w3);
      for (auto [bn, bv] : {std::pair{"mlp.b1", &att->mlp.b1}, {"mlp.b2", &att->mlp.b2},
                            {"mlp.b3", &att->mlp.b3}}) {
        vec_storage.emplace_back(*bv);
        out.emplace_back(p + bn, &vec_storage.back());
      }
    }
    out.emplace_back(base + "match.ws", &w.W_S[l]);
    out.emplace_back(base + "match.wt", &w.W_T[l]);
  }
}

}  // namespace

void write_weights(const std::string& path, const PipelineWeights& weights) {
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> entries;
  std::vector<Eigen::MatrixXd> storage;
  storage.reserve(64);
  collect_weight_entries(weights, entries, storage);
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "cannot open " + path + " for writing");
  os.write("LPWB", 4);
  write_raw<std::uint32_t>(os, 1);
  write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, m] : entries) {
    write_raw<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_lprd_record(os, *m);
  }
}

PipelineWeights read_weights(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  require(static_cast<bool>(is) && std::memcmp(magic, "LPWB", 4) == 0, "bad LPWB magic");
  require(read_raw<std::uint32_t>(is) == 1, "unsupported LPWB version");
  std::uint32_t count = read_raw<std::uint32_t>(is);
  std::map<std::string, Eigen::MatrixXd> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint16_t len = read_raw<std::uint16_t>(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    entries[name] = read_lprd_record(is);
  }
  auto get = [&](const std::string& name) -> const Eigen::MatrixXd& {
    auto it = entries.find(name);
    require(it != entries.end(), "weights bundle missing entry " + name);
    return it->second;
  };
  PipelineWeights w;
  for (int l = 0; l < kPipelineLayers; ++l) {
    std::string base = "tmp" + std::to_string(l) + ".";
    for (auto [tag, att] : {std::pair{"self.", &w.tmp[l].self}, {"cross.", &w.tmp[l].cross}}) {
      std::string p = base + tag;
      att->W_q = get(p + "wq");
      att->W_k = get(p + "wk");
      att->W_v = get(p + "wv");
      att->mlp.w1 = get(p + "mlp.w1");
      att->mlp.w2 = get(p + "mlp.w2");
      att->mlp.w3 = get(p + "mlp.w3");
      att->mlp.b1 = get(p + "mlp.b1").col(0);
      att->mlp.b2 = get(p + "mlp.b2").col(0);
      att->mlp.b3 = get(p + "mlp.b3").col(0);
    }
    w.W_S[l] = get(base + "match.ws");
    w.W_T[l] = get(base + "match.wt");
  }
  return w;
}

std::string correspondences_to_json(const CorrespondenceSet& set) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& m : set) pairs.push_back({m.src, m.tgt, m.confidence});
  return nlohmann::json{{"pairs", pairs}}.dump(2);
}

CorrespondenceSet correspondences_from_json(const std::string& text) {
  nlohmann::json j = parse_json(text);
  CorrespondenceSet out;
  for (const auto& p : j.at("pairs")) {
    require(p.is_array() && p.size() == 3, "pair must be [i, j, confidence]");
    out.push_back({p[0].get<int>(), p[1].get<int>(), p[2].get<double>()});
  }
  return out;
}

std::string transform_to_json(const RigidTransform& tf) {
  nlohmann::json j;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) j["R"].push_back(tf.R(r, c));
  for (int i = 0; i < 3; ++i) j["t"].push_back(tf.t[i]);
  return j.dump(2);
}

RigidTransform transform_from_json(const std::string& text) {
  nlohmann::json j = parse_json(text);
  require(j.at("R").size() == 9 && j.at("t").size() == 3, "transform must have R[9], t[3]");
  RigidTransform tf;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) tf.R(r, c) = j["R"][3 * r + c];
  for (int i = 0; i < 3; ++i) tf.t[i] = j["t"][i];
  return tf;
}

RunConfig RunConfig::defaults(const std::string& mode) {
  RunConfig c;
  c.mode = mode;
  if (mode == "rigid") {
    c.inlier_sigma = 0.1;
    c.confidence_threshold = 0.05;
    c.apply_mnn = false;
    c.subsample_voxel = 0.025;
    c.gt_match_radius = 0.06;
    c.warping_loss_weight = 0.0;
  } else if (mode == "deformable") {
    c.inlier_sigma = 0.04;
    c.confidence_threshold = 0.1;
    c.apply_mnn = true;
    c.subsample_voxel = 0.01;
    c.gt_match_radius = 0.024;
    c.warping_loss_weight = 0.1;
  } else {
    throw ValidationError("mode must be 'rigid' or 'deformable'");
  }
  return c;
}

std::string RunConfig::to_json() const {
  nlohmann::json j{{"mode", mode},
                   {"feature_dim", feature_dim},
                   {"encoding_base", encoding_base},
                   {"inlier_sigma", inlier_sigma},
                   {"rr_rmse_threshold", rr_rmse_threshold},
                   {"fmr_ir_threshold", fmr_ir_threshold},
                   {"confidence_threshold", confidence_threshold},
                   {"apply_mnn", apply_mnn},
                   {"subsample_voxel", subsample_voxel},
                   {"gt_match_radius", gt_match_radius},
                   {"warping_loss_weight", warping_loss_weight},
                   {"lambda_c", lambda_c},
                   {"lambda_a", lambda_a},
                   {"node_spacing", node_spacing},
                   {"edge_k", edge_k},
                   {"skin_k", skin_k},
                   {"gamma_skin", gamma_skin},
                   {"min_component_nodes", min_component_nodes},
                   {"nicp_max_iters", nicp_max_iters},
                   {"ransac_iterations", ransac_iterations},
                   {"ransac_inlier_sigma", ransac_inlier_sigma},
                   {"seed", seed}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  nlohmann::json j = parse_json(text);
  require(j.is_object(), "config must be a JSON object");
  RunConfig base = RunConfig::defaults(j.value("mode", std::string("rigid")));
  nlohmann::json known = nlohmann::json::parse(base.to_json());
  for (auto it = j.begin(); it != j.end(); ++it)
    require(known.contains(it.key()), "unknown config key: " + it.key());

  RunConfig c = base;
  auto num = [&](const char* key, double& field) {
    if (j.contains(key)) {
      require(j[key].is_number(), std::string(key) + " must be a number");
      field = j[key];
    }
  };
  auto integer = [&](const char* key, int& field) {
    if (j.contains(key)) {
      require(j[key].is_number_integer(), std::string(key) + " must be an integer");
      field = j[key];
    }
  };
  num("encoding_base", c.encoding_base);
  num("inlier_sigma", c.inlier_sigma);
  num("rr_rmse_threshold", c.rr_rmse_threshold);
  num("fmr_ir_threshold", c.fmr_ir_threshold);
  num("confidence_threshold", c.confidence_threshold);
  num("subsample_voxel", c.subsample_voxel);
  num("gt_match_radius", c.gt_match_radius);
  num("warping_loss_weight", c.warping_loss_weight);
  num("lambda_c", c.lambda_c);
  num("lambda_a", c.lambda_a);
  num("node_spacing", c.node_spacing);
  num("gamma_skin", c.gamma_skin);
  num("ransac_inlier_sigma", c.ransac_inlier_sigma);
  integer("feature_dim", c.feature_dim);
  integer("edge_k", c.edge_k);
  integer("skin_k", c.skin_k);
  integer("min_component_nodes", c.min_component_nodes);
  integer("nicp_max_iters", c.nicp_max_iters);
  integer("ransac_iterations", c.ransac_iterations);
  if (j.contains("apply_mnn")) {
    require(j["apply_mnn"].is_boolean(), "apply_mnn must be a boolean");
    c.apply_mnn = j["apply_mnn"];
  }
  if (j.contains("seed")) {
    require(j["seed"].is_number_unsigned() || j["seed"].is_number_integer(),
            "seed must be an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  require(c.feature_dim > 0 && c.feature_dim % 6 == 0,
          "feature_dim must be a positive multiple of 6");
  require(c.inlier_sigma > 0 && c.subsample_voxel > 0 && c.gt_match_radius > 0 &&
              c.node_spacing > 0 && c.gamma_skin > 0,
          "length parameters must be positive");
  require(c.confidence_threshold >= 0 && c.confidence_threshold < 1,
          "confidence_threshold must be in [0,1)");
  return c;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), "cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), "cannot open " + path + " for writing");
  os << text;
}

}  // namespace pcm
