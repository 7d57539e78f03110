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

#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sage/common/bytes.hpp"
#include "sage/common/types.hpp"
#include "sage/core/ids.hpp"
#include "sage/core/layout.hpp"
#include "sage/kv/kv_store.hpp"
#include "sage/object/object_engine.hpp"

namespace sage {
namespace op {

struct ObjCreate {
  ObjectMeta meta;
};
struct ObjDelete {
  ObjectId id;
};
struct ObjWrite {
  ObjectId id;
  std::uint64_t start_block = 0;
  Bytes data;
};
struct IdxCreate {
  IndexId id = 0;
  std::string name;
};
struct IdxPut {
  IndexId id = 0;
  std::vector<Record> records;
};
struct IdxDel {
  IndexId id = 0;
  std::vector<Bytes> keys;
};
// Layout change carrying the re-encoded units of the affected extents.
struct Relayout {
  ObjectId id;
  Layout layout;
  std::vector<UnitWrite> units;
};
struct ContainerCreate {
  ContainerId id = 0;
  std::string label;
  std::optional<TierId> hint;
};
struct ContainerAdd {
  ContainerId id = 0;
  ObjectId object;
};
struct ContainerRemove {
  ContainerId id = 0;
  ObjectId object;
};

}  // namespace op

using TxnOp = std::variant<op::ObjCreate, op::ObjDelete, op::ObjWrite, op::IdxCreate, op::IdxPut, op::IdxDel,
                           op::Relayout, op::ContainerCreate, op::ContainerAdd, op::ContainerRemove>;

void encode_op(ByteWriter& w, const TxnOp& op);
TxnOp decode_op(ByteReader& r);
const char* op_name(const TxnOp& op) noexcept;

enum class TxnState { open, committed, aborted };

// A group of updates applied atomically by Store::commit. Confined to one
// thread at a time.
class Txn {
 public:
  explicit Txn(TxnId id) : id_(id) {}

  TxnId id() const noexcept { return id_; }
  TxnState state() const noexcept { return state_; }
  const std::vector<TxnOp>& ops() const noexcept { return ops_; }

  void create_object(ObjectMeta meta) { push(op::ObjCreate{std::move(meta)}); }
  void delete_object(const ObjectId& id) { push(op::ObjDelete{id}); }
  void write(const ObjectId& id, std::uint64_t start_block, ByteView data) {
    push(op::ObjWrite{id, start_block, Bytes(data.begin(), data.end())});
  }
  void put(IndexId index, std::vector<Record> records) { push(op::IdxPut{index, std::move(records)}); }
  void del(IndexId index, std::vector<Bytes> keys) { push(op::IdxDel{index, std::move(keys)}); }
  void push(TxnOp op);

 private:
  friend class Store;
  TxnId id_;
  TxnState state_ = TxnState::open;
  std::vector<TxnOp> ops_;
};

}  // namespace sage
