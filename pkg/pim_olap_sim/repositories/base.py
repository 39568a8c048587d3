"""Abstract repository interface for encoded databases."""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Optional

from pim_olap_sim.models.store import Database, StoreManifest


class StoreRepository(ABC):
    """Abstract repository interface for saved database stores."""

    @abstractmethod
    def save(
        self,
        name: str,
        db: Database,
        scale_factor: Optional[float] = None,
        seed: Optional[int] = None,
        denorm_level: Optional[str] = None,
    ) -> Path:
        """Persist a database under ``name``.

        Args:
            name: Store name
            db: Encoded database to write
            scale_factor: Generator scale factor, recorded in the manifest
            seed: Generator seed, recorded in the manifest
            denorm_level: Denormalization level of the stored widetable, if any

        Returns:
            Path of the written store file
        """
        pass

    @abstractmethod
    def open(self, name: str) -> Database:
        """Load a saved database.

        Args:
            name: Store name

        Returns:
            Decoded Database

        Raises:
            StoreFormatError: If the store is missing, truncated or of an unknown format
        """
        pass

    @abstractmethod
    def manifest(self, name: str) -> Optional[StoreManifest]:
        """Read the manifest written next to a store.

        Args:
            name: Store name

        Returns:
            StoreManifest if present, None otherwise
        """
        pass

    @abstractmethod
    def exists(self, name: str) -> bool:
        """Check if a store exists.

        Args:
            name: Store name

        Returns:
            True if exists, False otherwise
        """
        pass

    @abstractmethod
    def delete(self, name: str) -> bool:
        """Delete a store and its manifest.

        Args:
            name: Store name

        Returns:
            True if the store was deleted, False if not found
        """
        pass

    @abstractmethod
    def list_stores(self) -> List[str]:
        """Names of all saved stores, sorted."""
        pass
