// Copyright 2026 The oaas-mini Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "oaas/package/manifest.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "oaas/common/errors.h"

namespace oaas::package {

std::string_view LocalityName(Locality locality) {
  return locality == Locality::kLocal ? "Local" : "None";
}

std::string_view ArchetypeName(Archetype archetype) {
  switch (archetype) {
    case Archetype::kChatty:
      return "chatty";
    case Archetype::kDataIntensive:
      return "data-intensive";
    case Archetype::kComputeIntensive:
      return "compute-intensive";
  }
  return "chatty";
}

QosSpec QosSpec::OverlaidWith(const QosSpec& over) const {
  QosSpec out = *this;
  if (over.throughput) out.throughput = over.throughput;
  if (over.availability) out.availability = over.availability;
  if (over.locality) out.locality = over.locality;
  return out;
}

ConstraintSpec ConstraintSpec::OverlaidWith(const ConstraintSpec& over) const {
  ConstraintSpec out = *this;
  if (over.persistent) out.persistent = over.persistent;
  for (const auto& [k, v] : over.runtime_req) out.runtime_req[k] = v;
  for (const auto& [k, v] : over.unenforced) out.unenforced[k] = v;
  return out;
}

const std::vector<std::string>& UnenforcedConstraintKeys() {
  static const std::vector<std::string> keys = {"budget", "consistency", "jurisdiction",
                                                "encryption"};
  return keys;
}

WorkloadProfile WorkloadProfile::ForArchetype(Archetype archetype) {
  WorkloadProfile p;
  p.archetype = archetype;
  switch (archetype) {
    case Archetype::kChatty:
      // A ten-key JSON document, one key rewritten per step.
      p.service_mean_ms = 1.0;
      p.bytes_in = 1024;
      p.bytes_out = 1024;
      p.chain_length = 10;
      break;
    case Archetype::kDataIntensive:
      p.service_mean_ms = 50.0;
      p.bytes_in = 2 * 1024 * 1024;
      p.bytes_out = 2 * 1024 * 1024;
      break;
    case Archetype::kComputeIntensive:
      p.service_mean_ms = 2000.0;
      p.bytes_in = 64 * 1024;
      p.bytes_out = 4 * 1024;
      break;
  }
  return p;
}

const ClassDefinition* PackageManifest::Find(std::string_view name) const {
  for (const auto& c : classes) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

std::string Where(const YAML::Node& node) {
  const auto mark = node.Mark();
  if (mark.is_null()) return "";
  return fmt::format(" (line {})", mark.line + 1);
}

void RequireMap(const YAML::Node& node, std::string_view what) {
  if (!node.IsMap()) {
    throw SchemaError(fmt::format("{} must be a mapping{}", what, Where(node)));
  }
}

void RequireKeys(const YAML::Node& node, std::string_view what,
                 std::initializer_list<std::string_view> allowed) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw SchemaError(fmt::format("unknown key '{}' in {}{}", key, what, Where(kv.first)));
    }
  }
}

std::string ScalarString(const YAML::Node& node, std::string_view what) {
  if (!node.IsScalar()) {
    throw SchemaError(fmt::format("{} must be a scalar{}", what, Where(node)));
  }
  return node.Scalar();
}

std::string Identifier(const YAML::Node& node, std::string_view what) {
  auto s = ScalarString(node, what);
  if (s.empty()) throw SchemaError(fmt::format("{} must be non-empty{}", what, Where(node)));
  return s;
}

double Number(const YAML::Node& node, std::string_view what) {
  if (!node.IsScalar()) throw SchemaError(fmt::format("{} must be a number{}", what, Where(node)));
  try {
    return node.as<double>();
  } catch (const YAML::BadConversion&) {
    throw SchemaError(fmt::format("{} must be a number{}", what, Where(node)));
  }
}

int64_t Integer(const YAML::Node& node, std::string_view what) {
  if (!node.IsScalar()) {
    throw SchemaError(fmt::format("{} must be an integer{}", what, Where(node)));
  }
  try {
    return node.as<int64_t>();
  } catch (const YAML::BadConversion&) {
    throw SchemaError(fmt::format("{} must be an integer{}", what, Where(node)));
  }
}

bool Boolean(const YAML::Node& node, std::string_view what) {
  if (!node.IsScalar()) throw SchemaError(fmt::format("{} must be a boolean{}", what, Where(node)));
  try {
    return node.as<bool>();
  } catch (const YAML::BadConversion&) {
    throw SchemaError(fmt::format("{} must be a boolean{}", what, Where(node)));
  }
}

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

QosSpec ParseQos(const YAML::Node& node) {
  QosSpec qos;
  if (!node || node.IsNull()) return qos;
  RequireMap(node, "qos");
  RequireKeys(node, "qos", {"throughput", "availability", "locality"});
  if (auto t = node["throughput"]) {
    const auto v = Integer(t, "qos.throughput");
    if (v < 0) throw RangeError(fmt::format("qos.throughput must be >= 0{}", Where(t)));
    qos.throughput = v;
  }
  if (auto a = node["availability"]) {
    const auto v = Number(a, "qos.availability");
    if (!(v > 0.0 && v < 100.0)) {
      throw RangeError(
          fmt::format("qos.availability must lie strictly between 0 and 100{}", Where(a)));
    }
    qos.availability = v;
  }
  if (auto l = node["locality"]) {
    const auto v = Lower(ScalarString(l, "qos.locality"));
    if (v == "local") {
      qos.locality = Locality::kLocal;
    } else if (v == "none") {
      qos.locality = Locality::kNone;
    } else {
      throw SchemaError(fmt::format("qos.locality must be Local or None{}", Where(l)));
    }
  }
  return qos;
}

ConstraintSpec ParseConstraint(const YAML::Node& node) {
  ConstraintSpec c;
  if (!node || node.IsNull()) return c;
  RequireMap(node, "constraint");
  const auto& unenforced = UnenforcedConstraintKeys();
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (key == "persistent") {
      c.persistent = Boolean(kv.second, "constraint.persistent");
    } else if (key == "runtimeReq") {
      if (kv.second.IsNull()) continue;
      RequireMap(kv.second, "constraint.runtimeReq");
      for (const auto& rr : kv.second) {
        c.runtime_req[rr.first.as<std::string>()] =
            ScalarString(rr.second, "constraint.runtimeReq value");
      }
    } else if (std::find(unenforced.begin(), unenforced.end(), key) != unenforced.end()) {
      c.unenforced[key] = YAML::Dump(kv.second);
    } else {
      throw SchemaError(fmt::format("unknown key '{}' in constraint{}", key, Where(kv.first)));
    }
  }
  return c;
}

Archetype ParseArchetype(const YAML::Node& node) {
  const auto v = Lower(ScalarString(node, "x-sim.archetype"));
  if (v == "chatty") return Archetype::kChatty;
  if (v == "data-intensive" || v == "dataintensive") return Archetype::kDataIntensive;
  if (v == "compute-intensive" || v == "computeintensive") return Archetype::kComputeIntensive;
  throw SchemaError(fmt::format("unknown archetype '{}'{}", v, Where(node)));
}

WorkloadProfile ParseProfile(const YAML::Node& node) {
  RequireMap(node, "x-sim");
  RequireKeys(node, "x-sim",
              {"archetype", "serviceMs", "distribution", "bytesIn", "bytesOut", "chainLength",
               "cpu", "concurrency", "chain"});
  WorkloadProfile p;
  if (auto a = node["archetype"]) p = WorkloadProfile::ForArchetype(ParseArchetype(a));
  if (auto s = node["serviceMs"]) {
    p.service_mean_ms = Number(s, "x-sim.serviceMs");
    if (!(p.service_mean_ms > 0)) throw RangeError("x-sim.serviceMs must be positive");
  }
  if (auto d = node["distribution"]) {
    const auto v = Lower(ScalarString(d, "x-sim.distribution"));
    if (v == "constant") {
      p.distribution = ServiceDistribution::kConstant;
    } else if (v == "exponential") {
      p.distribution = ServiceDistribution::kExponential;
    } else {
      throw SchemaError(fmt::format("unknown distribution '{}'{}", v, Where(d)));
    }
  }
  if (auto b = node["bytesIn"]) p.bytes_in = Integer(b, "x-sim.bytesIn");
  if (auto b = node["bytesOut"]) p.bytes_out = Integer(b, "x-sim.bytesOut");
  if (p.bytes_in < 0 || p.bytes_out < 0) throw RangeError("x-sim byte counts must be >= 0");
  if (auto c = node["chainLength"]) {
    p.chain_length = static_cast<int>(Integer(c, "x-sim.chainLength"));
    if (p.chain_length < 1) throw RangeError("x-sim.chainLength must be >= 1");
  }
  if (auto c = node["cpu"]) {
    p.cpu = Number(c, "x-sim.cpu");
    if (!(p.cpu > 0)) throw RangeError("x-sim.cpu must be positive");
  }
  if (auto c = node["concurrency"]) {
    p.concurrency = static_cast<int>(Integer(c, "x-sim.concurrency"));
    if (p.concurrency < 1) throw RangeError("x-sim.concurrency must be >= 1");
  }
  if (auto c = node["chain"]) {
    if (!c.IsSequence()) throw SchemaError("x-sim.chain must be a list");
    for (const auto& step : c) p.chain.push_back(Identifier(step, "x-sim.chain entry"));
  }
  return p;
}

KeySpec ParseKeySpec(const YAML::Node& node) {
  KeySpec k;
  if (node.IsScalar()) {
    k.name = Identifier(node, "keySpec name");
    return k;
  }
  RequireMap(node, "keySpec");
  RequireKeys(node, "keySpec", {"name", "kind"});
  if (!node["name"]) throw SchemaError(fmt::format("keySpec requires a name{}", Where(node)));
  k.name = Identifier(node["name"], "keySpec name");
  if (auto kind = node["kind"]) {
    const auto v = Lower(ScalarString(kind, "keySpec kind"));
    if (v == "structured") {
      k.kind = KeyKind::kStructured;
    } else if (v == "unstructured") {
      k.kind = KeyKind::kUnstructured;
    } else {
      throw SchemaError(fmt::format("keySpec kind must be Structured or Unstructured{}",
                                    Where(kind)));
    }
  }
  return k;
}

FunctionDefinition ParseFunction(const YAML::Node& node) {
  RequireMap(node, "function");
  RequireKeys(node, "function", {"name", "image", "qos", "x-sim"});
  FunctionDefinition f;
  if (!node["name"]) throw SchemaError(fmt::format("function requires a name{}", Where(node)));
  f.name = Identifier(node["name"], "function name");
  if (auto image = node["image"]) f.image = ScalarString(image, "function image");
  f.qos = ParseQos(node["qos"]);
  if (auto sim = node["x-sim"]) f.workload_profile = ParseProfile(sim);
  return f;
}

ClassDefinition ParseClass(const YAML::Node& node) {
  RequireMap(node, "class");
  RequireKeys(node, "class", {"name", "parent", "qos", "constraint", "keySpecs", "functions"});
  ClassDefinition c;
  if (!node["name"]) throw SchemaError(fmt::format("class requires a name{}", Where(node)));
  c.name = Identifier(node["name"], "class name");
  if (auto parent = node["parent"]) {
    if (parent.IsSequence()) {
      throw SchemaError(
          fmt::format("class '{}' declares multiple parents; only single inheritance is "
                      "supported{}",
                      c.name, Where(parent)));
    }
    c.parent = Identifier(parent, "class parent");
  }
  c.qos = ParseQos(node["qos"]);
  c.constraint = ParseConstraint(node["constraint"]);
  if (auto keys = node["keySpecs"]; keys && !keys.IsNull()) {
    if (!keys.IsSequence()) throw SchemaError(fmt::format("keySpecs must be a list{}", Where(keys)));
    for (const auto& k : keys) c.key_specs.push_back(ParseKeySpec(k));
  }
  if (auto fns = node["functions"]; fns && !fns.IsNull()) {
    if (!fns.IsSequence()) throw SchemaError(fmt::format("functions must be a list{}", Where(fns)));
    for (const auto& f : fns) c.functions.push_back(ParseFunction(f));
  }
  return c;
}

void EmitQos(YAML::Emitter& out, const QosSpec& qos) {
  out << YAML::Key << "qos" << YAML::Value << YAML::BeginMap;
  if (qos.throughput) out << YAML::Key << "throughput" << YAML::Value << *qos.throughput;
  if (qos.availability) {
    out << YAML::Key << "availability" << YAML::Value << fmt::format("{}", *qos.availability);
  }
  if (qos.locality) {
    out << YAML::Key << "locality" << YAML::Value << std::string(LocalityName(*qos.locality));
  }
  out << YAML::EndMap;
}

void EmitProfile(YAML::Emitter& out, const WorkloadProfile& p) {
  out << YAML::Key << "x-sim" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "archetype" << YAML::Value << std::string(ArchetypeName(p.archetype));
  out << YAML::Key << "serviceMs" << YAML::Value << fmt::format("{}", p.service_mean_ms);
  out << YAML::Key << "distribution" << YAML::Value
      << (p.distribution == ServiceDistribution::kConstant ? "constant" : "exponential");
  out << YAML::Key << "bytesIn" << YAML::Value << p.bytes_in;
  out << YAML::Key << "bytesOut" << YAML::Value << p.bytes_out;
  out << YAML::Key << "chainLength" << YAML::Value << p.chain_length;
  out << YAML::Key << "cpu" << YAML::Value << fmt::format("{}", p.cpu);
  out << YAML::Key << "concurrency" << YAML::Value << p.concurrency;
  if (!p.chain.empty()) {
    out << YAML::Key << "chain" << YAML::Value << YAML::Flow << p.chain;
  }
  out << YAML::EndMap;
}

}  // namespace

PackageManifest ParseManifest(std::string_view source) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(source));
  } catch (const YAML::ParserException& e) {
    throw SyntaxError(e.what());
  }
  if (!root.IsMap()) throw SchemaError("manifest must be a mapping with a 'classes' key");
  RequireKeys(root, "manifest", {"classes"});
  auto classes = root["classes"];
  if (!classes) throw SchemaError("manifest is missing 'classes'");
  PackageManifest manifest;
  if (classes.IsNull()) return manifest;
  if (!classes.IsSequence()) throw SchemaError("'classes' must be a list");
  std::set<std::string> seen;
  for (const auto& c : classes) {
    auto parsed = ParseClass(c);
    if (!seen.insert(parsed.name).second) {
      throw SchemaError(fmt::format("duplicate class name '{}'{}", parsed.name, Where(c)));
    }
    manifest.classes.push_back(std::move(parsed));
  }
  return manifest;
}

PackageManifest LoadManifestFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open manifest '{}'", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseManifest(buf.str());
}

std::string SerializeManifest(const PackageManifest& manifest) {
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "classes" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : manifest.classes) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << c.name;
    if (c.parent) out << YAML::Key << "parent" << YAML::Value << *c.parent;
    if (!c.qos.Empty()) EmitQos(out, c.qos);
    const auto& con = c.constraint;
    if (con.persistent || !con.runtime_req.empty() || !con.unenforced.empty()) {
      out << YAML::Key << "constraint" << YAML::Value << YAML::BeginMap;
      if (con.persistent) out << YAML::Key << "persistent" << YAML::Value << *con.persistent;
      if (!con.runtime_req.empty()) {
        out << YAML::Key << "runtimeReq" << YAML::Value << YAML::BeginMap;
        for (const auto& [k, v] : con.runtime_req) out << YAML::Key << k << YAML::Value << v;
        out << YAML::EndMap;
      }
      for (const auto& [k, raw] : con.unenforced) {
        out << YAML::Key << k << YAML::Value << YAML::Load(raw);
      }
      out << YAML::EndMap;
    }
    out << YAML::Key << "keySpecs" << YAML::Value << YAML::BeginSeq;
    for (const auto& k : c.key_specs) {
      out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << k.name;
      out << YAML::Key << "kind" << YAML::Value
          << (k.kind == KeyKind::kStructured ? "Structured" : "Unstructured");
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "functions" << YAML::Value << YAML::BeginSeq;
    for (const auto& f : c.functions) {
      out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << f.name;
      if (f.image) out << YAML::Key << "image" << YAML::Value << *f.image;
      if (!f.qos.Empty()) EmitQos(out, f.qos);
      if (f.workload_profile) EmitProfile(out, *f.workload_profile);
      out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace oaas::package
