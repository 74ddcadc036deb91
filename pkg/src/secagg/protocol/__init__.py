"""The per-round collection protocol: client, server and decryptor roles."""

from .client import MASK_PEER, ReportSecrets, build_report, client_report, pair_point, pair_sign
from .decryptor import (
    CheckFailure,
    CrossCheckState,
    check_labels,
    decryptor_cross_check,
    decryptor_reconstruct,
    decryptor_sign_request,
    min_online,
    new_state,
)
from .dleq import DleqProof, dleq_prove, dleq_verify
from .messages import (
    OFFLINE,
    ONLINE,
    Attachment,
    DecryptionRequest,
    DecryptorResponse,
    MaskedVector,
    RequestBundle,
    SignedCiphertext,
    SignedRequest,
)
from .server import CollectResult, FinalizeResult, server_collect, server_finalize, tau
