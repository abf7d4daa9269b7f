// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/memo.hpp"

#include "parex/codec.hpp"
#include "parex/digest.hpp"

namespace parex {

std::string memo_key(const AppSpec& app, const ValueList& args, const ValueMap& kwargs) {
  // Each component is length-delimited by the codec, so distinct
  // (name, fingerprint, args, kwargs) tuples cannot collide by concatenation.
  std::string material;
  material += encode(Value(app.name));
  material += encode(Value(app.body_fingerprint));
  material += encode(Value(args));
  material += encode(Value(kwargs));
  return sha256_hex(material);
}

}  // namespace parex
