from typing import Generic, TypeVar, List, Dict, Any
import logging

from multifield.core.exceptions import UnknownCaseError, InputError

ItemType = TypeVar("ItemType")

logger = logging.getLogger(__name__)

class BaseRegistry(Generic[ItemType]):
    """
    Base registry with common lookup operations over tagged items.
    """

    def __init__(self, kind: str):
        """
        Initialize an empty registry.

        Args:
            kind: Human-readable name of the registered items, used in errors
        """
        self.kind = kind
        self._items: Dict[str, ItemType] = {}
        self._descriptions: Dict[str, str] = {}

    def get(self, tag: str) -> ItemType:
        """
        Get a single item by tag.

        Args:
            tag: Registered tag

        Returns:
            ItemType: Registered item

        Raises:
            UnknownCaseError: If the tag is not registered
        """
        item = self._items.get(tag)
        if item is None:
            raise UnknownCaseError(self.kind, tag, list(self._items))
        return item

    def register(self, tag: str, item: ItemType, *, description: str = "", replace: bool = False) -> ItemType:
        """
        Register a new item.

        Raises:
            InputError: If the tag is taken and ``replace`` is False
        """
        if not tag:
            raise InputError(f"{self.kind} tag must be a non-empty string", field="tag")
        if tag in self._items and not replace:
            raise InputError(f"{self.kind} '{tag}' is already registered", field="tag")
        self._items[tag] = item
        self._descriptions[tag] = description
        logger.debug(f"Registered {self.kind} '{tag}'")
        return item

    def exists(self, tag: str) -> bool:
        return tag in self._items

    def tags(self) -> List[str]:
        return sorted(self._items)

    def catalog(self) -> Dict[str, Any]:
        """Sorted tag -> description listing."""
        return {tag: self._descriptions.get(tag, "") for tag in sorted(self._items)}
