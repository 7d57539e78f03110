// Copyright 2026 The Sagekit Authors
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

#include "sage/txn/txn_op.hpp"

#include "sage/common/error.hpp"

namespace sage {
namespace {

void put_id(ByteWriter& w, const ObjectId& id) {
  w.u64(id.hi);
  w.u64(id.lo);
}

ObjectId get_id(ByteReader& r) {
  ObjectId id;
  id.hi = r.u64();
  id.lo = r.u64();
  return id;
}

struct Encoder {
  ByteWriter& w;

  void operator()(const op::ObjCreate& o) const { encode_meta(w, o.meta); }
  void operator()(const op::ObjDelete& o) const { put_id(w, o.id); }
  void operator()(const op::ObjWrite& o) const {
    put_id(w, o.id);
    w.u64(o.start_block);
    w.blob(o.data);
  }
  void operator()(const op::IdxCreate& o) const {
    w.u64(o.id);
    w.str(o.name);
  }
  void operator()(const op::IdxPut& o) const {
    w.u64(o.id);
    w.u64(o.records.size());
    for (const auto& rec : o.records) {
      w.blob(rec.key);
      w.blob(rec.value);
    }
  }
  void operator()(const op::IdxDel& o) const {
    w.u64(o.id);
    w.u64(o.keys.size());
    for (const auto& k : o.keys) w.blob(k);
  }
  void operator()(const op::Relayout& o) const {
    put_id(w, o.id);
    encode_layout(w, o.layout);
    w.u64(o.units.size());
    for (const auto& u : o.units) {
      w.u64(u.key.extent_start);
      w.u32(u.key.device);
      w.u64(u.key.row);
      w.blob(u.data);
    }
  }
  void operator()(const op::ContainerCreate& o) const {
    w.u64(o.id);
    w.str(o.label);
    w.u8(o.hint ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(o.hint.value_or(0)));
  }
  void operator()(const op::ContainerAdd& o) const {
    w.u64(o.id);
    put_id(w, o.object);
  }
  void operator()(const op::ContainerRemove& o) const {
    w.u64(o.id);
    put_id(w, o.object);
  }
};

}  // namespace

void encode_op(ByteWriter& w, const TxnOp& op) {
  w.u8(static_cast<std::uint8_t>(op.index()));
  std::visit(Encoder{w}, op);
}

TxnOp decode_op(ByteReader& r) {
  switch (r.u8()) {
    case 0:
      return op::ObjCreate{decode_meta(r)};
    case 1:
      return op::ObjDelete{get_id(r)};
    case 2: {
      op::ObjWrite o;
      o.id = get_id(r);
      o.start_block = r.u64();
      o.data = r.blob();
      return o;
    }
    case 3: {
      op::IdxCreate o;
      o.id = r.u64();
      o.name = r.str();
      return o;
    }
    case 4: {
      op::IdxPut o;
      o.id = r.u64();
      const std::uint64_t n = r.u64();
      for (std::uint64_t i = 0; i < n; ++i) {
        Record rec;
        rec.key = r.blob();
        rec.value = r.blob();
        o.records.push_back(std::move(rec));
      }
      return o;
    }
    case 5: {
      op::IdxDel o;
      o.id = r.u64();
      const std::uint64_t n = r.u64();
      for (std::uint64_t i = 0; i < n; ++i) o.keys.push_back(r.blob());
      return o;
    }
    case 6: {
      op::Relayout o;
      o.id = get_id(r);
      o.layout = decode_layout(r);
      const std::uint64_t n = r.u64();
      for (std::uint64_t i = 0; i < n; ++i) {
        UnitWrite u;
        u.key.extent_start = r.u64();
        u.key.device = r.u32();
        u.key.row = r.u64();
        u.data = r.blob();
        o.units.push_back(std::move(u));
      }
      return o;
    }
    case 7: {
      op::ContainerCreate o;
      o.id = r.u64();
      o.label = r.str();
      const bool has_hint = r.u8() != 0;
      const auto hint = static_cast<TierId>(r.u32());
      if (has_hint) o.hint = hint;
      return o;
    }
    case 8: {
      op::ContainerAdd o;
      o.id = r.u64();
      o.object = get_id(r);
      return o;
    }
    case 9: {
      op::ContainerRemove o;
      o.id = r.u64();
      o.object = get_id(r);
      return o;
    }
    default:
      raise(Errc::corrupt, "unknown txn op tag");
  }
}

const char* op_name(const TxnOp& op) noexcept {
  static constexpr const char* names[] = {"obj_create", "obj_delete", "obj_write", "idx_create", "idx_put",
                                          "idx_del",    "relayout",   "container_create", "container_add",
                                          "container_remove"};
  return names[op.index()];
}

void Txn::push(TxnOp op) {
  if (state_ != TxnState::open) raise(Errc::invalid_state, "txn " + std::to_string(id_) + " is not open");
  ops_.push_back(std::move(op));
}

}  // namespace sage
