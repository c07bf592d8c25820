#pragma once
// Error taxonomy. Hard contract violations throw; conditions the pipeline
// is expected to absorb (partial plugs, rejected reroute rules, truncated
// path enumeration, ...) travel as data on the result types instead.

#include <stdexcept>
#include <string>

namespace recist {

class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

#define RECIST_DEFINE_ERROR(Name)                                  \
    class Name : public Error {                                    \
    public:                                                        \
        explicit Name(const std::string& what) : Error(#Name, what) {} \
    }

RECIST_DEFINE_ERROR(NodeNotFound);
RECIST_DEFINE_ERROR(NodeUnavailable);
RECIST_DEFINE_ERROR(CapacityExceeded);
RECIST_DEFINE_ERROR(CriticalityViolation);
RECIST_DEFINE_ERROR(Unreachable);
RECIST_DEFINE_ERROR(ZeroCapacity);
RECIST_DEFINE_ERROR(UnknownNode);
RECIST_DEFINE_ERROR(IllegalTransition);
RECIST_DEFINE_ERROR(AgentOffline);
RECIST_DEFINE_ERROR(MalformedHeader);
RECIST_DEFINE_ERROR(UnknownDialect);
RECIST_DEFINE_ERROR(ReasonerUnavailable);
RECIST_DEFINE_ERROR(EvaluatorUnavailable);
RECIST_DEFINE_ERROR(EmbedderUnavailable);
RECIST_DEFINE_ERROR(EmptyNarrative);
RECIST_DEFINE_ERROR(SchemaViolation);
RECIST_DEFINE_ERROR(BudgetExceeded);
RECIST_DEFINE_ERROR(BadThresholds);
RECIST_DEFINE_ERROR(DimensionMismatch);
RECIST_DEFINE_ERROR(EmptyScope);
RECIST_DEFINE_ERROR(ConfigError);
RECIST_DEFINE_ERROR(IoError);

#undef RECIST_DEFINE_ERROR

}  // namespace recist
