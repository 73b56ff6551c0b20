// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace semfuzz {

/// Base of every error raised by the library. `kind()` is the stable,
/// machine-readable name used in reports and CLI diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define SEMFUZZ_DEFINE_ERROR(Name, Base)                                        \
    class Name : public Base {                                                  \
    public:                                                                     \
        explicit Name(const std::string& what) : Base(#Name, what) {}           \
                                                                                \
    protected:                                                                  \
        Name(std::string kind, const std::string& what)                         \
            : Base(std::move(kind), what) {}                                    \
    };

// message-model
SEMFUZZ_DEFINE_ERROR(InvalidPath, Error)
SEMFUZZ_DEFINE_ERROR(PathNotFound, Error)
SEMFUZZ_DEFINE_ERROR(AmbiguousPath, Error)
SEMFUZZ_DEFINE_ERROR(PositionOutOfRange, Error)
SEMFUZZ_DEFINE_ERROR(TypeMismatch, Error)
SEMFUZZ_DEFINE_ERROR(InvalidMessage, Error)

// protocol-codecs
SEMFUZZ_DEFINE_ERROR(MalformedWire, Error)
SEMFUZZ_DEFINE_ERROR(Unencodable, Error)
SEMFUZZ_DEFINE_ERROR(NoRuleForDerivedField, Error)

// seed-ingest
SEMFUZZ_DEFINE_ERROR(NotTsharkJson, Error)
SEMFUZZ_DEFINE_ERROR(NoMatchingFrames, Error)
SEMFUZZ_DEFINE_ERROR(NoSeedForType, Error)

// llm-gateway
SEMFUZZ_DEFINE_ERROR(MissingVariable, Error)
SEMFUZZ_DEFINE_ERROR(UnknownTemplate, MissingVariable)
SEMFUZZ_DEFINE_ERROR(TransportError, Error)
SEMFUZZ_DEFINE_ERROR(FixtureMiss, Error)
SEMFUZZ_DEFINE_ERROR(SchemaViolation, Error)

// rule-constructor / testcase-generator / campaign-runner
SEMFUZZ_DEFINE_ERROR(StructureNotFound, Error)
SEMFUZZ_DEFINE_ERROR(FieldNotInSeed, Error)
SEMFUZZ_DEFINE_ERROR(TargetUnknown, Error)
SEMFUZZ_DEFINE_ERROR(UnparseableResponse, Error)

// eval / fixtures / config
SEMFUZZ_DEFINE_ERROR(EmptyBatch, Error)
SEMFUZZ_DEFINE_ERROR(PortInUse, Error)
SEMFUZZ_DEFINE_ERROR(ConfigError, Error)
SEMFUZZ_DEFINE_ERROR(IoError, Error)

#undef SEMFUZZ_DEFINE_ERROR

}  // namespace semfuzz
