"""Mine message flow models from interleaved message traces."""

from .acceptor import EvaluationResult, FlowAcceptor, compile_acceptor, evaluate
from .causality import CausalityGraph, PrunedGraph, aggregate_statistics, construct_causality_graph, prune
from .errors import (
    DuplicateMessageError,
    EmptyDictionaryError,
    EmptyModelError,
    MsgflowError,
    OverPrunedError,
    ParseError,
    UndefinedMessageError,
)
from .essential import EssentialSet, essential_flows, extract_essential, remove_emfs
from .mining import FlowModel, MiningResult, Path, mine, refine, select_base_model
from .model import (
    Kind,
    Message,
    MessageDictionary,
    Trace,
    TraceSet,
    causal,
    load_dictionary,
    load_traces,
    parse_message_definitions,
    parse_traces,
)
from .synth import FlowSpec, GenerationConfig, generate, project_ground_truth_ar

__version__ = "0.1.0"
